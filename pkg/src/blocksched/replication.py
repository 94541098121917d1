"""State-machine-replication main loop with pluggable block runners.

A block runner bundles schedule synthesis, schedule validation, and an
execution engine behind one interface. The main loop fetches blocks from an
ordered stream (file or generator backed; no real consensus layer here),
checks sequence numbers and the previous-block hash, runs the block through
the runner, applies the state changes, and appends a digest record to an
append-only ledger. Replaying the same stream with any sequentially
deterministic runner reproduces the ledger byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

from .coloring import (
    Coloring,
    descending_degree_order,
    exact_min_coloring,
    exact_min_weighted_coloring,
    greedy_coloring,
    partition_from_coloring,
)
from .conflict import ConflictGraph, build_conflict_graph
from .errors import CapacityError, InvariantError, ParseError, ValidationError
from .executor import BatchExecutionHandle, GraphExecutionHandle
from .model import Block, GlobalState, Transaction, TxResult, block_hash, validate_block
from .schedule import (
    BatchSchedule,
    GraphSchedule,
    is_valid_schedule,
    level_schedule,
    size_descending_color_order,
    total_order_schedule,
)

_POLL_SLEEP_S = 0.0002


@dataclass(frozen=True)
class TxError:
    """Per-transaction error emitted when a block fails validation."""

    tx_id: int
    error: str


BlockResults = list[Union[TxResult, TxError]]


@dataclass(frozen=True)
class GraphPlan:
    """A runner-produced graph schedule plus synthesis metadata."""

    schedule: GraphSchedule
    levels: tuple[tuple[int, ...], ...] | None = None
    coloring_mode: str | None = None
    exact: bool | None = None  # False when the exact colorer fell back to greedy


@dataclass(frozen=True)
class BatchPlan:
    batches: BatchSchedule
    levels: tuple[tuple[int, ...], ...]
    coloring_mode: str | None = None
    exact: bool | None = None


class BlockRunner(ABC):
    """Schedule synthesis plus execution engine behind one swappable interface.

    ``make_schedule`` must be a pure deterministic function of the
    transactions and the conflict constraints.
    """

    name: str = "runner"

    @abstractmethod
    def make_schedule(self, txs: Sequence[Transaction], constraints: ConflictGraph) -> Any: ...

    @abstractmethod
    def validate_schedule(
        self, txs: Sequence[Transaction], constraints: ConflictGraph, plan: Any
    ) -> bool: ...

    @abstractmethod
    def init_execution(self, block: Block, plan: Any, state: GlobalState) -> Any: ...

    def start_execution(self, execution: Any) -> None:
        execution.start()

    def is_execution_running(self, execution: Any) -> bool:
        return execution.running()

    def next_execution_results(self, execution: Any) -> list[TxResult]:
        return execution.drain_results()

    def state_changes(self, execution: Any) -> dict[str, int]:
        return execution.outcome().state_changes


def _color_partition(coloring: Coloring, color_order: str) -> tuple[tuple[int, ...], ...]:
    if color_order == "size-desc":
        return size_descending_color_order(coloring)
    if color_order == "ascending":
        return partition_from_coloring(coloring)
    raise ValidationError(f"unknown color order {color_order!r}")


class OrderFollowingRunner(BlockRunner):
    """Baseline: direct every conflict edge by the consensus list order."""

    name = "order"

    def make_schedule(self, txs, constraints):
        return GraphPlan(schedule=total_order_schedule(txs, constraints))

    def validate_schedule(self, txs, constraints, plan):
        return isinstance(plan, GraphPlan) and is_valid_schedule(plan.schedule, constraints)

    def init_execution(self, block, plan, state):
        return GraphExecutionHandle(block, plan.schedule, state, validate=False)


class _ColoringRunnerBase(BlockRunner):
    def __init__(self, color_order: str = "size-desc") -> None:
        self._color_order = color_order

    def _partition(self, g: ConflictGraph) -> tuple[tuple[tuple[int, ...], ...], str, bool]:
        raise NotImplementedError

    def make_schedule(self, txs, constraints):
        levels, mode, exact = self._partition(constraints)
        return GraphPlan(
            schedule=level_schedule(levels, constraints),
            levels=levels,
            coloring_mode=mode,
            exact=exact,
        )

    def validate_schedule(self, txs, constraints, plan):
        return isinstance(plan, GraphPlan) and is_valid_schedule(plan.schedule, constraints)

    def init_execution(self, block, plan, state):
        return GraphExecutionHandle(block, plan.schedule, state, validate=False)


class GreedyColoringRunner(_ColoringRunnerBase):
    """Level schedule from a first-fit coloring in descending-degree order."""

    name = "greedy"

    def _partition(self, g):
        coloring = greedy_coloring(g, descending_degree_order(g))
        return _color_partition(coloring, self._color_order), "greedy", False


class MinColoringRunner(_ColoringRunnerBase):
    """Level schedule from an exact minimal coloring, greedy above the cap."""

    name = "min-coloring"

    def __init__(self, color_order: str = "size-desc", exact_cap: int = 64) -> None:
        super().__init__(color_order)
        self._exact_cap = exact_cap

    def _partition(self, g):
        try:
            coloring = exact_min_coloring(g, cap=self._exact_cap)
            exact = True
        except CapacityError:
            coloring = greedy_coloring(g, descending_degree_order(g))
            exact = False
        return _color_partition(coloring, self._color_order), "exact", exact


class WeightedColoringRunner(BlockRunner):
    """Level schedule from an exact minimal weighted coloring.

    Weighted coloring needs the transaction lengths, so this runner overrides
    ``make_schedule`` instead of sharing the unweighted base. With
    ``epsilon_cutoff`` set, a block whose length spread is within the cutoff
    is treated as homogeneous and colored unweighted. Falls back to greedy
    above the exact cap.
    """

    name = "weighted-coloring"

    def __init__(
        self,
        color_order: str = "size-desc",
        exact_cap: int = 20,
        epsilon_cutoff: int | None = None,
    ) -> None:
        self._color_order = color_order
        self._exact_cap = exact_cap
        self._epsilon_cutoff = epsilon_cutoff

    def make_schedule(self, txs, constraints):
        lengths = {tx.id: tx.length for tx in txs}
        spread = max(lengths.values()) - min(lengths.values()) if lengths else 0
        mode = "weighted-exact"
        exact = True
        try:
            if self._epsilon_cutoff is not None and spread <= self._epsilon_cutoff:
                coloring = exact_min_coloring(constraints, cap=self._exact_cap)
                mode = "exact"
            else:
                coloring = exact_min_weighted_coloring(constraints, lengths, cap=self._exact_cap)
        except CapacityError:
            coloring = greedy_coloring(constraints, descending_degree_order(constraints))
            exact = False
        levels = _color_partition(coloring, self._color_order)
        return GraphPlan(
            schedule=level_schedule(levels, constraints),
            levels=levels,
            coloring_mode=mode,
            exact=exact,
        )

    def validate_schedule(self, txs, constraints, plan):
        return isinstance(plan, GraphPlan) and is_valid_schedule(plan.schedule, constraints)

    def init_execution(self, block, plan, state):
        return GraphExecutionHandle(block, plan.schedule, state, validate=False)


class BatchRunner(BlockRunner):
    """Batch execution over the greedy-coloring partition."""

    name = "batch"

    def __init__(self, color_order: str = "size-desc") -> None:
        self._color_order = color_order

    def make_schedule(self, txs, constraints):
        coloring = greedy_coloring(constraints, descending_degree_order(constraints))
        levels = _color_partition(coloring, self._color_order)
        return BatchPlan(
            batches=BatchSchedule(levels), levels=levels, coloring_mode="greedy", exact=False
        )

    def validate_schedule(self, txs, constraints, plan):
        if not isinstance(plan, BatchPlan):
            return False
        if plan.batches.ids != frozenset(range(constraints.n)):
            return False
        for batch in plan.batches.batches:
            for i, u in enumerate(batch):
                for v in batch[i + 1 :]:
                    if constraints.are_adjacent(u, v):
                        return False
        return True

    def init_execution(self, block, plan, state):
        return BatchExecutionHandle(block, plan.batches, state, validate=False)


BUILTIN_RUNNERS = {
    "order": OrderFollowingRunner,
    "greedy": GreedyColoringRunner,
    "min-coloring": MinColoringRunner,
    "weighted-coloring": WeightedColoringRunner,
    "batch": BatchRunner,
}


def make_runner(
    name: str,
    *,
    color_order: str = "size-desc",
    exact_cap: int = 64,
    weighted_cap: int = 20,
    epsilon_cutoff: int | None = None,
) -> BlockRunner:
    if name == "order":
        return OrderFollowingRunner()
    if name == "greedy":
        return GreedyColoringRunner(color_order)
    if name == "min-coloring":
        return MinColoringRunner(color_order, exact_cap)
    if name == "weighted-coloring":
        return WeightedColoringRunner(color_order, weighted_cap, epsilon_cutoff)
    if name == "batch":
        return BatchRunner(color_order)
    raise ValidationError(f"unknown runner {name!r}; choose from {sorted(BUILTIN_RUNNERS)}")


def process_block(
    runner: BlockRunner, block: Block, state: GlobalState
) -> tuple[dict[str, int], BlockResults]:
    """Run one block through a runner: constraints, schedule, validate, execute, drain.

    An invalid block produces one error result per transaction and leaves the
    state untouched. A runner that produces a schedule failing its own
    validation is a fatal configuration error.
    """
    problems = validate_block(block)
    if problems:
        reason = "; ".join(problems)
        return {}, [TxError(tx_id=tx.id, error=reason) for tx in block.txs]
    constraints = build_conflict_graph(block)
    plan = runner.make_schedule(block.txs, constraints)
    if not runner.validate_schedule(block.txs, constraints, plan):
        raise InvariantError(f"runner {runner.name!r} produced an invalid schedule")
    execution = runner.init_execution(block, plan, state)
    runner.start_execution(execution)
    results: BlockResults = []
    while runner.is_execution_running(execution):
        results.extend(runner.next_execution_results(execution))
        time.sleep(_POLL_SLEEP_S)
    results.extend(runner.next_execution_results(execution))
    return runner.state_changes(execution), results


# ---------------------------------------------------------------------------
# Ledger: append-only, length-prefixed records with a digest chain.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    block_hash: str
    results_digest: str
    state_digest: str
    record_digest: str


def results_digest(results: BlockResults) -> str:
    canonical = []
    for item in sorted(results, key=lambda r: r.tx_id):
        if isinstance(item, TxError):
            canonical.append({"id": item.tx_id, "error": item.error})
        else:
            canonical.append(
                {
                    "id": item.tx_id,
                    "reads": sorted(item.read_values.items()),
                    "writes": sorted(item.written_values.items()),
                }
            )
    payload = json.dumps(canonical, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _record_digest(prev_digest: str, seq: int, bhash: str, rdigest: str, sdigest: str) -> str:
    payload = json.dumps(
        {"prev": prev_digest, "seq": seq, "block": bhash, "results": rdigest, "state": sdigest},
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def make_record(prev_digest: str, seq: int, bhash: str, rdigest: str, sdigest: str) -> LedgerRecord:
    return LedgerRecord(
        seq=seq,
        block_hash=bhash,
        results_digest=rdigest,
        state_digest=sdigest,
        record_digest=_record_digest(prev_digest, seq, bhash, rdigest, sdigest),
    )


class Ledger:
    """Append-only record file. Each record is a 4-byte big-endian length
    followed by a canonical JSON payload; records chain through sha256."""

    GENESIS_DIGEST = ""

    def __init__(self, path) -> None:
        self.path = Path(path)

    def append(self, record: LedgerRecord) -> None:
        payload = json.dumps(
            {
                "seq": record.seq,
                "block_hash": record.block_hash,
                "results_digest": record.results_digest,
                "state_digest": record.state_digest,
                "record_digest": record.record_digest,
            },
            separators=(",", ":"),
        ).encode()
        with open(self.path, "ab") as fh:
            fh.write(struct.pack(">I", len(payload)))
            fh.write(payload)

    def load(self) -> list[LedgerRecord]:
        """Read and verify the whole chain; raises ParseError on corruption."""
        if not self.path.exists():
            return []
        records: list[LedgerRecord] = []
        prev = self.GENESIS_DIGEST
        with open(self.path, "rb") as fh:
            index = 0
            while True:
                header = fh.read(4)
                if not header:
                    break
                if len(header) < 4:
                    raise ParseError(f"ledger record {index}: truncated length prefix")
                (length,) = struct.unpack(">I", header)
                payload = fh.read(length)
                if len(payload) < length:
                    raise ParseError(f"ledger record {index}: truncated payload")
                try:
                    obj = json.loads(payload)
                    record = LedgerRecord(
                        seq=obj["seq"],
                        block_hash=obj["block_hash"],
                        results_digest=obj["results_digest"],
                        state_digest=obj["state_digest"],
                        record_digest=obj["record_digest"],
                    )
                except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
                    raise ParseError(f"ledger record {index}: malformed payload") from exc
                expect = _record_digest(
                    prev, record.seq, record.block_hash, record.results_digest, record.state_digest
                )
                if expect != record.record_digest:
                    raise ParseError(f"ledger record {index}: digest chain broken")
                if records and record.seq != records[-1].seq + 1:
                    raise ParseError(f"ledger record {index}: sequence gap")
                records.append(record)
                prev = record.record_digest
                index += 1
        return records

    def truncate(self) -> None:
        with open(self.path, "wb"):
            pass


def run_main_loop(
    runner: BlockRunner,
    blocks: Iterable[Block],
    initial_state: GlobalState,
    ledger_path,
    *,
    resume: bool = False,
    max_blocks: int | None = None,
) -> GlobalState:
    """Process an ordered block stream, appending one ledger record per block.

    With ``resume`` the existing ledger chain is verified first; already
    recorded blocks are re-executed deterministically and checked against
    their records instead of being appended again, so a run killed between
    blocks finishes with the exact ledger of an uninterrupted run.
    ``max_blocks`` stops after that many blocks (used to simulate a crash).
    """
    ledger = Ledger(ledger_path)
    existing = ledger.load() if resume else []
    if not resume:
        ledger.truncate()
    state = initial_state
    prev_hash: bytes | None = None
    prev_record_digest = Ledger.GENESIS_DIGEST
    expected_seq: int | None = None
    processed = 0
    for block in blocks:
        if max_blocks is not None and processed >= max_blocks:
            break
        if expected_seq is None:
            if block.seq != 0:
                raise ValidationError(f"stream must start at seq 0, got {block.seq}")
        elif block.seq != expected_seq:
            raise ValidationError(f"sequence gap: expected {expected_seq}, got {block.seq}")
        if prev_hash is not None and block.prev_hash != prev_hash:
            raise ValidationError(f"block {block.seq}: prev_hash does not match previous block")
        changes, results = process_block(runner, block, state)
        state = state.with_changes(changes)
        bhash = block_hash(block).hex()
        record = make_record(
            prev_record_digest,
            block.seq,
            bhash,
            results_digest(results),
            state.digest(),
        )
        if processed < len(existing):
            if existing[processed] != record:
                raise ParseError(
                    f"resume diverged at seq {block.seq}: replayed record does not match ledger"
                )
        else:
            ledger.append(record)
        prev_record_digest = record.record_digest
        prev_hash = block_hash(block)
        expected_seq = block.seq + 1
        processed += 1
    return state
