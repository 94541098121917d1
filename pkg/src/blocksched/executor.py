"""Executors: concurrent graph-schedule execution, batch execution, a
sequential reference, and a discrete-event simulation.

The concurrent engine spawns one worker per transaction. Every schedule edge
becomes a single-shot signal created locked; a worker blocks on all incoming
signals, reads the latest committed value of each read-set key, runs its
program, commits its writes, emits its result, and releases its outgoing
signals. Validity of the schedule (every conflicting pair path-ordered) is
checked before launch and is the sole safety premise: it guarantees that no
two conflicting transactions ever overlap, so the store needs nothing beyond
atomic per-key publication.

Emission order of non-conflicting transactions is NOT part of the
deterministic contract; equivalence compares the unordered result set and
the final state changes.
"""

from __future__ import annotations

import hashlib
import heapq
import random
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .conflict import build_conflict_graph
from .errors import InvariantError, ValidationError
from .model import Block, GlobalState, Transaction, TxResult, run_program
from .schedule import BatchSchedule, GraphSchedule, is_valid_schedule, latency


@dataclass(frozen=True)
class ExecutionOutcome:
    """Results in emission order plus the merged state changes.

    ``state_changes`` maps every written key to its final committed value,
    i.e. later writes along the dependency order override earlier ones.
    """

    results: tuple[TxResult, ...]
    state_changes: dict[str, int]
    emission_order: tuple[int, ...]

    def results_by_id(self) -> dict[int, TxResult]:
        return {r.tx_id: r for r in self.results}


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(repr(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _jitter_rng(seed: int | None, tx_id: int) -> random.Random | None:
    if seed is None:
        return None
    return random.Random(_stable_seed(seed, tx_id))


def _sleep_jitter(rng: random.Random | None, max_jitter_us: int) -> None:
    if rng is not None and max_jitter_us > 0:
        time.sleep(rng.uniform(0, max_jitter_us) / 1_000_000)


def execute_sequential(block: Block, order: Sequence[int], state: GlobalState) -> ExecutionOutcome:
    """Run transactions one by one against an evolving copy of the state.

    This is the reference oracle every concurrent path is compared against.
    """
    ids = [tx.id for tx in block.txs]
    if sorted(order) != sorted(ids):
        raise ValidationError("order must be a permutation of the block's transaction ids")
    by_id = {tx.id: tx for tx in block.txs}
    store = {k: v for k, v in state.items()}
    written_keys: set[str] = set()
    results: list[TxResult] = []
    for tx_id in order:
        tx = by_id[tx_id]
        reads = {k: store.get(k, 0) for k in sorted(tx.read_set)}
        written = run_program(tx, reads)
        for key in sorted(written):
            store[key] = written[key]
        written_keys.update(written)
        results.append(TxResult(tx_id=tx.id, read_values=reads, written_values=written))
    changes = {k: store[k] for k in sorted(written_keys)}
    return ExecutionOutcome(
        results=tuple(results), state_changes=changes, emission_order=tuple(order)
    )


class GraphExecutionHandle:
    """A prepared concurrent execution of one graph schedule.

    Call :meth:`start` to release the source transactions, poll
    :meth:`running` / :meth:`drain_results` while it runs, then collect the
    final :meth:`outcome`. ``max_workers`` switches to a bounded ready-queue
    pool used for stress testing; it preserves semantics but makes no latency
    claims.
    """

    def __init__(
        self,
        block: Block,
        schedule: GraphSchedule,
        state: GlobalState,
        *,
        jitter_seed: int | None = None,
        max_jitter_us: int = 0,
        early_release_bug: bool = False,
        trace: bool = False,
        max_workers: int | None = None,
        validate: bool = True,
    ) -> None:
        if validate:
            g = build_conflict_graph(block)
            if schedule.n != g.n:
                raise ValidationError(
                    f"schedule has {schedule.n} vertices, block has {g.n} transactions"
                )
            if not is_valid_schedule(schedule, g):
                raise ValidationError(
                    "invalid schedule: some conflicting pair has no dependency path"
                )
        self._block = block
        self._schedule = schedule
        self._store: dict[str, int] = {k: v for k, v in state.items()}
        self._written_keys: set[str] = set()
        self._results: list[TxResult] = []
        self._cursor = 0
        self._lock = threading.Lock()
        self._start_event = threading.Event()
        self._done = threading.Event()
        self._pending = len(block.txs)
        self._jitter_seed = jitter_seed
        self._max_jitter_us = max_jitter_us
        self._early_release_bug = early_release_bug
        self.trace: list[tuple[int, int, int]] | None = [] if trace else None
        self._threads: list[threading.Thread] = []
        if self._pending == 0:
            self._done.set()
        elif max_workers is None:
            self._spawn_signal_workers()
        else:
            self._spawn_pool_workers(max_workers)

    # -- signal mode: one worker per transaction, one locked signal per edge --

    def _spawn_signal_workers(self) -> None:
        by_id = {tx.id: tx for tx in self._block.txs}
        signals = {edge: threading.Event() for edge in self._schedule.edges}
        for tx_id in range(self._schedule.n):
            tx = by_id[tx_id]
            in_signals = [signals[(u, tx_id)] for u in self._schedule.preds[tx_id]]
            out_signals = [signals[(tx_id, v)] for v in self._schedule.succs[tx_id]]
            thread = threading.Thread(
                target=self._signal_worker, args=(tx, in_signals, out_signals), daemon=True
            )
            self._threads.append(thread)
            thread.start()

    def _signal_worker(
        self,
        tx: Transaction,
        in_signals: list[threading.Event],
        out_signals: list[threading.Event],
    ) -> None:
        self._start_event.wait()
        for signal in in_signals:
            signal.wait()
        self._run_one(tx, release=lambda: [s.set() for s in out_signals])

    # -- pool mode: bounded workers pulling from a ready queue --

    def _spawn_pool_workers(self, max_workers: int) -> None:
        if max_workers < 1:
            raise ValidationError("max_workers must be >= 1")
        self._indeg = {v: len(self._schedule.preds[v]) for v in range(self._schedule.n)}
        self._ready: list[int] = [v for v, d in self._indeg.items() if d == 0]
        heapq.heapify(self._ready)
        self._queue_cv = threading.Condition()
        for _ in range(min(max_workers, self._pending)):
            thread = threading.Thread(target=self._pool_worker, daemon=True)
            self._threads.append(thread)
            thread.start()

    def _pool_worker(self) -> None:
        self._start_event.wait()
        by_id = {tx.id: tx for tx in self._block.txs}
        while True:
            with self._queue_cv:
                while not self._ready and not self._done.is_set():
                    self._queue_cv.wait(timeout=0.05)
                if self._done.is_set() and not self._ready:
                    return
                tx_id = heapq.heappop(self._ready)
            tx = by_id[tx_id]

            def release() -> None:
                with self._queue_cv:
                    for succ in self._schedule.succs[tx_id]:
                        self._indeg[succ] -= 1
                        if self._indeg[succ] == 0:
                            heapq.heappush(self._ready, succ)
                    self._queue_cv.notify_all()

            self._run_one(tx, release=release)
            if self._done.is_set():
                with self._queue_cv:
                    self._queue_cv.notify_all()
                return

    # -- shared per-transaction body --

    def _run_one(self, tx: Transaction, release: Callable[[], None]) -> None:
        rng = _jitter_rng(self._jitter_seed, tx.id)
        _sleep_jitter(rng, self._max_jitter_us)
        t0 = time.perf_counter_ns()
        reads = {k: self._store.get(k, 0) for k in sorted(tx.read_set)}
        written = run_program(tx, reads)
        _sleep_jitter(rng, self._max_jitter_us)
        if self._early_release_bug:
            # fault injection for negative tests: successors are released
            # before the writes are committed, so they can observe stale state
            self._emit(tx.id, reads, written)
            release()
            time.sleep(0.0001)
            _sleep_jitter(rng, self._max_jitter_us)
            self._commit(written)
            self._finish_one()
            return
        self._commit(written)
        t1 = time.perf_counter_ns()
        if self.trace is not None:
            with self._lock:
                self.trace.append((tx.id, t0, t1))
        self._emit(tx.id, reads, written)
        release()
        self._finish_one()

    def _commit(self, written: dict[str, int]) -> None:
        for key in sorted(written):
            self._store[key] = written[key]
        if written:
            with self._lock:
                self._written_keys.update(written)

    def _emit(self, tx_id: int, reads: dict[str, int], written: dict[str, int]) -> None:
        with self._lock:
            self._results.append(TxResult(tx_id=tx_id, read_values=reads, written_values=written))

    def _finish_one(self) -> None:
        with self._lock:
            self._pending -= 1
            if self._pending == 0:
                self._done.set()

    # -- public surface --

    def start(self) -> None:
        self._start_event.set()

    def running(self) -> bool:
        return not self._done.is_set()

    def drain_results(self) -> list[TxResult]:
        with self._lock:
            new = self._results[self._cursor :]
            self._cursor = len(self._results)
        return list(new)

    def wait(self) -> None:
        if not self._start_event.is_set():
            raise ValidationError("execution was never started")
        self._done.wait()
        for thread in self._threads:
            thread.join()

    def outcome(self) -> ExecutionOutcome:
        self.wait()
        changes = {k: self._store[k] for k in sorted(self._written_keys)}
        return ExecutionOutcome(
            results=tuple(self._results),
            state_changes=changes,
            emission_order=tuple(r.tx_id for r in self._results),
        )


def execute_graph_schedule(
    block: Block,
    schedule: GraphSchedule,
    state: GlobalState,
    *,
    jitter_seed: int | None = None,
    max_jitter_us: int = 0,
    trace: bool = False,
    max_workers: int | None = None,
) -> ExecutionOutcome:
    """Run the block concurrently under a valid graph schedule (blocking)."""
    handle = GraphExecutionHandle(
        block,
        schedule,
        state,
        jitter_seed=jitter_seed,
        max_jitter_us=max_jitter_us,
        trace=trace,
        max_workers=max_workers,
    )
    handle.start()
    return handle.outcome()


def execute_graph_schedule_broken(
    block: Block,
    schedule: GraphSchedule,
    state: GlobalState,
    *,
    jitter_seed: int | None = None,
    max_jitter_us: int = 0,
    max_workers: int | None = None,
) -> ExecutionOutcome:
    """Deliberately defective executor that releases signals before committing
    writes. Exists only as the negative control for determinism tests."""
    handle = GraphExecutionHandle(
        block,
        schedule,
        state,
        jitter_seed=jitter_seed,
        max_jitter_us=max_jitter_us,
        early_release_bug=True,
        max_workers=max_workers,
    )
    handle.start()
    return handle.outcome()


class BatchExecutionHandle:
    """Strictly sequential batches; within a batch every transaction runs
    concurrently against the snapshot committed by the prior batches."""

    def __init__(
        self,
        block: Block,
        batches: BatchSchedule,
        state: GlobalState,
        *,
        jitter_seed: int | None = None,
        max_jitter_us: int = 0,
        validate: bool = True,
    ) -> None:
        if validate:
            g = build_conflict_graph(block)
            if batches.ids != frozenset(range(g.n)):
                raise ValidationError("batches must partition the block's transaction ids")
            for i, batch in enumerate(batches.batches):
                for a_idx, u in enumerate(batch):
                    for v in batch[a_idx + 1 :]:
                        if g.are_adjacent(u, v):
                            raise ValidationError(
                                f"batch {i} is not conflict-free: pair ({u}, {v}) conflicts"
                            )
        self._block = block
        self._batches = batches
        self._store: dict[str, int] = {k: v for k, v in state.items()}
        self._written_keys: set[str] = set()
        self._results: list[TxResult] = []
        self._cursor = 0
        self._lock = threading.Lock()
        self._done = threading.Event()
        self._jitter_seed = jitter_seed
        self._max_jitter_us = max_jitter_us
        self._driver = threading.Thread(target=self._run_batches, daemon=True)

    def _run_batches(self) -> None:
        by_id = {tx.id: tx for tx in self._block.txs}
        for batch in self._batches.batches:
            snapshot = dict(self._store)
            collected: dict[int, dict[str, int]] = {}

            def worker(tx: Transaction) -> None:
                rng = _jitter_rng(self._jitter_seed, tx.id)
                _sleep_jitter(rng, self._max_jitter_us)
                reads = {k: snapshot.get(k, 0) for k in sorted(tx.read_set)}
                written = run_program(tx, reads)
                _sleep_jitter(rng, self._max_jitter_us)
                with self._lock:
                    collected[tx.id] = written
                    self._results.append(
                        TxResult(tx_id=tx.id, read_values=reads, written_values=written)
                    )

            threads = [threading.Thread(target=worker, args=(by_id[v],), daemon=True) for v in batch]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()
            # conflict-freedom makes write keys disjoint within the batch
            for tx_id in sorted(collected):
                for key in sorted(collected[tx_id]):
                    self._store[key] = collected[tx_id][key]
                self._written_keys.update(collected[tx_id])
        self._done.set()

    def start(self) -> None:
        self._driver.start()

    def running(self) -> bool:
        return not self._done.is_set()

    def drain_results(self) -> list[TxResult]:
        with self._lock:
            new = self._results[self._cursor :]
            self._cursor = len(self._results)
        return list(new)

    def outcome(self) -> ExecutionOutcome:
        self._driver.join()
        changes = {k: self._store[k] for k in sorted(self._written_keys)}
        return ExecutionOutcome(
            results=tuple(self._results),
            state_changes=changes,
            emission_order=tuple(r.tx_id for r in self._results),
        )


def execute_batch_schedule(
    block: Block,
    batches: BatchSchedule,
    state: GlobalState,
    *,
    jitter_seed: int | None = None,
    max_jitter_us: int = 0,
) -> ExecutionOutcome:
    """Run the block batch by batch (blocking)."""
    handle = BatchExecutionHandle(
        block, batches, state, jitter_seed=jitter_seed, max_jitter_us=max_jitter_us
    )
    handle.start()
    return handle.outcome()


def simulate_execution(
    block: Block, schedule: GraphSchedule, state: GlobalState
) -> tuple[ExecutionOutcome, int]:
    """Discrete-event simulation of the concurrent executor with unbounded workers.

    A transaction starts when its last predecessor finishes and runs for
    exactly its length; the returned makespan equals the schedule's latency.
    """
    g = build_conflict_graph(block)
    if not is_valid_schedule(schedule, g):
        raise ValidationError("invalid schedule: some conflicting pair has no dependency path")
    by_id = {tx.id: tx for tx in block.txs}
    lengths = {tx.id: tx.length for tx in block.txs}
    n = schedule.n
    remaining = {v: len(schedule.preds[v]) for v in range(n)}
    ready_at = {v: 0 for v in range(n)}
    heap: list[tuple[int, int]] = []
    for v in range(n):
        if remaining[v] == 0:
            heapq.heappush(heap, (lengths[v], v))
    store = {k: v for k, v in state.items()}
    written_keys: set[str] = set()
    results: list[TxResult] = []
    makespan = 0
    while heap:
        finish, v = heapq.heappop(heap)
        makespan = max(makespan, finish)
        tx = by_id[v]
        reads = {k: store.get(k, 0) for k in sorted(tx.read_set)}
        written = run_program(tx, reads)
        for key in sorted(written):
            store[key] = written[key]
        written_keys.update(written)
        results.append(
            TxResult(tx_id=v, read_values=reads, written_values=written, finish_time=finish)
        )
        for succ in schedule.succs[v]:
            ready_at[succ] = max(ready_at[succ], finish)
            remaining[succ] -= 1
            if remaining[succ] == 0:
                heapq.heappush(heap, (ready_at[succ] + lengths[succ], succ))
    changes = {k: store[k] for k in sorted(written_keys)}
    outcome = ExecutionOutcome(
        results=tuple(results),
        state_changes=changes,
        emission_order=tuple(r.tx_id for r in results),
    )
    if block.txs and makespan != latency(schedule, lengths):
        raise InvariantError("simulation makespan diverged from schedule latency")
    return outcome, makespan


@dataclass(frozen=True)
class DeterminismReport:
    ok: bool
    trials_run: int
    diff: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _outcome_diff(label: str, got: ExecutionOutcome, want: ExecutionOutcome) -> str | None:
    if got.state_changes != want.state_changes:
        return f"{label}: state changes differ\n got: {got.state_changes}\nwant: {want.state_changes}"
    got_by_id = got.results_by_id()
    want_by_id = want.results_by_id()
    if set(got_by_id) != set(want_by_id):
        return f"{label}: result id sets differ: {sorted(got_by_id)} vs {sorted(want_by_id)}"
    for tx_id in sorted(want_by_id):
        g_res, w_res = got_by_id[tx_id], want_by_id[tx_id]
        if g_res.read_values != w_res.read_values or g_res.written_values != w_res.written_values:
            return (
                f"{label}: tx {tx_id} differs\n got: reads={g_res.read_values} writes={g_res.written_values}"
                f"\nwant: reads={w_res.read_values} writes={w_res.written_values}"
            )
    return None


def stress_determinism(
    block: Block,
    schedule: GraphSchedule,
    state: GlobalState,
    trials: int = 100,
    *,
    max_jitter_us: int = 200,
    seed: int = 0,
    executor: Callable[..., ExecutionOutcome] = execute_graph_schedule,
) -> DeterminismReport:
    """Hammer the concurrent executor with adversarial sleeps.

    Every trial must match the sequential reference over a topological order
    of the schedule, both in final state and in every transaction's observed
    reads and writes. Any mismatch produces a diff report.
    """
    if trials < 2:
        raise ValidationError("stress_determinism needs at least 2 trials")
    baseline = execute_sequential(block, schedule.topo_order(), state)
    for trial in range(trials):
        out = executor(
            block,
            schedule,
            state,
            jitter_seed=_stable_seed(seed, trial),
            max_jitter_us=max_jitter_us,
        )
        diff = _outcome_diff(f"trial {trial}", out, baseline)
        if diff is not None:
            return DeterminismReport(ok=False, trials_run=trial + 1, diff=diff)
    return DeterminismReport(ok=True, trials_run=trials)
