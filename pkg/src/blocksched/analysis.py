"""Optimality oracle, graph-to-block transform, order-penalty estimators,
and counterexample searches.

The oracle searches every ordered legal partition (with memoization, per
connected component), which is exhaustive because level scheduling is
complete: every valid schedule is dominated by some level schedule. A slower
oracle that enumerates all acyclic orientations of the conflict graph exists
for double-checking the fast one.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .coloring import (
    descending_degree_order,
    exact_min_coloring,
    exact_min_weighted_coloring,
    greedy_coloring,
    partition_from_coloring,
)
from .conflict import ConflictGraph, build_conflict_graph
from .errors import CapacityError, InvariantError, ValidationError
from .model import Block, block_to_text
from .schedule import GraphSchedule, latency, level_schedule
from .workload import block_from_graph

ORACLE_CAP = 10
FULL_DAG_ORACLE_CAP = 8


def stable_seed(*parts) -> int:
    """Platform-independent 64-bit seed derived from the given parts."""
    digest = hashlib.sha256(":".join(repr(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Optimal-latency oracles
# ---------------------------------------------------------------------------

def _independent_subsets(candidates: int, adj: Sequence[int]) -> Iterator[int]:
    """Non-empty independent subsets of the candidate bitmask, in lexicographic
    order of their sorted member tuples."""
    while candidates:
        low = candidates & -candidates
        v = low.bit_length() - 1
        yield low
        compatible = candidates & ~low & ~adj[v] & ~(low - 1)
        for rest in _independent_subsets(compatible, adj):
            yield low | rest
        candidates &= ~low


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask &= ~low
    return out


def _component_optimum(
    vertices: list[int], g: ConflictGraph, lengths: Mapping[int, int]
) -> tuple[int, tuple[tuple[int, ...], ...]]:
    """Minimum latency and lexicographically smallest optimal ordered
    partition for one connected component, by memoized search over states.

    A level schedule finishes vertex v at len(v) plus the largest finish among
    conflicting vertices in earlier levels, so the only state a prefix leaves
    behind is the per-vertex ready time. States are normalized by their
    minimum ready time, which shifts values uniformly.
    """
    m = len(vertices)
    index = {v: i for i, v in enumerate(vertices)}
    adj = [0] * m
    for i, v in enumerate(vertices):
        for u in g.neighbors[v]:
            adj[i] |= 1 << index[u]
    lens = [lengths[vertices[i]] for i in range(m)]
    memo: dict[tuple[int, tuple[int, ...]], int] = {}

    def solve(mask: int, ready: tuple[int, ...]) -> int:
        if mask == 0:
            return 0
        shift = min(ready)
        if shift:
            ready = tuple(r - shift for r in ready)
        key = (mask, ready)
        cached = memo.get(key)
        if cached is not None:
            return cached + shift
        members = _bits(mask)
        rd = dict(zip(members, ready))
        best: int | None = None
        for level_mask in _independent_subsets(mask, adj):
            finish = {v: rd[v] + lens[v] for v in _bits(level_mask)}
            level_max = max(finish.values())
            rest = mask & ~level_mask
            new_ready = []
            for w in _bits(rest):
                r = rd[w]
                row = adj[w] & level_mask
                while row:
                    low = row & -row
                    f = finish[low.bit_length() - 1]
                    if f > r:
                        r = f
                    row &= ~low
                new_ready.append(r)
            val = max(level_max, solve(rest, tuple(new_ready)))
            if best is None or val < best:
                best = val
        memo[key] = best
        return best + shift

    full = (1 << m) - 1
    optimum = solve(full, (0,) * m)

    # reconstruct the lex-first optimal partition by replaying greedy choices
    levels: list[tuple[int, ...]] = []
    mask, ready = full, (0,) * m
    while mask:
        members = _bits(mask)
        rd = dict(zip(members, ready))
        target = solve(mask, ready)
        for level_mask in _independent_subsets(mask, adj):
            finish = {v: rd[v] + lens[v] for v in _bits(level_mask)}
            level_max = max(finish.values())
            rest = mask & ~level_mask
            new_ready = []
            for w in _bits(rest):
                r = rd[w]
                row = adj[w] & level_mask
                while row:
                    low = row & -row
                    f = finish[low.bit_length() - 1]
                    if f > r:
                        r = f
                    row &= ~low
                new_ready.append(r)
            if max(level_max, solve(rest, tuple(new_ready))) == target:
                levels.append(tuple(vertices[v] for v in _bits(level_mask)))
                mask, ready = rest, tuple(new_ready)
                break
        else:  # pragma: no cover - solve() guarantees some level matches
            raise AssertionError("no level reproduces the memoized optimum")
    return optimum, tuple(levels)


def optimal_schedule_oracle(block: Block, cap: int = ORACLE_CAP) -> tuple[GraphSchedule, int]:
    """Exhaustive minimum-latency search; returns a witness level schedule.

    Complete because level schedules dominate all valid schedules. Searches
    every ordered legal partition per connected component of the conflict
    graph; components are solved independently and merged level by level,
    with conflict-free vertices placed in the first level. Ties within a
    component resolve to the lexicographically smallest optimal partition,
    so the witness is deterministic.
    """
    g = build_conflict_graph(block)
    n = g.n
    if n > cap:
        raise CapacityError(f"oracle capped at {cap} transactions (block has {n})")
    lengths = {tx.id: tx.length for tx in block.txs}
    if n == 0:
        return GraphSchedule(0, frozenset()), 0

    isolated = [v for v in range(n) if not g.neighbors[v]]
    seen: set[int] = set(isolated)
    components: list[list[int]] = []
    for v in range(n):
        if v in seen:
            continue
        stack = [v]
        comp = []
        seen.add(v)
        while stack:
            w = stack.pop()
            comp.append(w)
            for u in g.neighbors[w]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        components.append(sorted(comp))

    best_val = max((lengths[v] for v in isolated), default=0)
    merged: list[list[int]] = [list(isolated)] if isolated else []
    for comp in components:
        comp_val, comp_levels = _component_optimum(comp, g, lengths)
        best_val = max(best_val, comp_val)
        while len(merged) < len(comp_levels):
            merged.append([])
        for i, level in enumerate(comp_levels):
            merged[i].extend(level)
    best_partition = tuple(tuple(sorted(level)) for level in merged if level)

    witness = level_schedule(best_partition, g)
    if latency(witness, lengths) != best_val:
        raise InvariantError("oracle witness latency diverged from the searched optimum")
    return witness, best_val


def optimal_latency_all_orientations(block: Block, cap: int = FULL_DAG_ORACLE_CAP) -> int:
    """Slow second oracle: minimum latency over all acyclic orientations of
    the conflict graph. Every valid schedule is dominated by the orientation
    it induces, and every orientation is itself a valid schedule."""
    g = build_conflict_graph(block)
    n = g.n
    if n > cap:
        raise CapacityError(f"orientation oracle capped at {cap} transactions (block has {n})")
    lengths = [tx.length for tx in sorted(block.txs, key=lambda t: t.id)]
    if n == 0:
        return 0
    edges = sorted(g.edges)
    best = None
    for perm in itertools.permutations(range(n)):
        pos = [0] * n
        for idx, v in enumerate(perm):
            pos[v] = idx
        finish = [0] * n
        for v in perm:
            incoming = 0
            for a, b in edges:
                u = None
                if b == v and pos[a] < pos[v]:
                    u = a
                elif a == v and pos[b] < pos[v]:
                    u = b
                if u is not None and finish[u] > incoming:
                    incoming = finish[u]
            finish[v] = incoming + lengths[v]
        lat = max(finish)
        if best is None or lat < best:
            best = lat
    return best


def transform_graph_to_block(g: ConflictGraph, c: int = 1) -> Block:
    """Homogeneous block realizing exactly the conflict relation of ``g``:
    one do-nothing transaction per vertex, one shared written key per edge."""
    if c < 1:
        raise ValidationError("length must be positive")
    return block_from_graph(g, [c] * g.n)


def _canonical_code(n: int, edges: frozenset[tuple[int, int]]) -> tuple:
    """Exact isomorphism invariant: the minimum edge bitmask over all
    relabelings that sort vertex degrees descending."""
    degree = [0] * n
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(degree[v], []).append(v)
    ordered_groups = [groups[d] for d in sorted(groups, reverse=True)]
    pair_index = {}
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            pair_index[(i, j)] = idx
            idx += 1
    best: int | None = None
    for perms in itertools.product(*(itertools.permutations(g) for g in ordered_groups)):
        label: dict[int, int] = {}
        slot = 0
        for group in perms:
            for v in group:
                label[v] = slot
                slot += 1
        code = 0
        for u, v in edges:
            a, b = label[u], label[v]
            code |= 1 << pair_index[(a, b) if a < b else (b, a)]
        if best is None or code < best:
            best = code
    return (n, tuple(sorted(degree, reverse=True)), best)


def connected_graph_catalog(max_n: int) -> list[ConflictGraph]:
    """Every connected graph on 1..max_n vertices, one per isomorphism class.

    Enumerates labeled graphs and dedupes by an exact canonical form; meant
    for desk-scale n (the count grows steeply past n=7).
    """
    catalog: list[ConflictGraph] = []
    for n in range(1, max_n + 1):
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        seen: set[tuple] = set()
        for bits in range(1 << len(pairs)):
            edges = frozenset(pairs[i] for i in range(len(pairs)) if (bits >> i) & 1)
            adj: dict[int, set[int]] = {v: set() for v in range(n)}
            for u, v in edges:
                adj[u].add(v)
                adj[v].add(u)
            stack, reached = [0], {0}
            while stack:
                w = stack.pop()
                for x in adj[w]:
                    if x not in reached:
                        reached.add(x)
                        stack.append(x)
            if len(reached) != n:
                continue
            code = _canonical_code(n, edges)
            if code in seen:
                continue
            seen.add(code)
            catalog.append(ConflictGraph(n=n, edges=edges))
    return catalog


# ---------------------------------------------------------------------------
# Order-penalty estimation
# ---------------------------------------------------------------------------

def est_longest_path(g: ConflictGraph, order: Sequence[int] | None = None) -> int:
    """Heuristic lower bound on the longest simple path, in edges.

    Dynamic program over the edges that respect the given vertex order
    (default ascending id, the uninformed block-creator framing).
    """
    if order is None:
        order = list(range(g.n))
    elif sorted(order) != list(range(g.n)):
        raise ValidationError(f"order must be a permutation of 0..{g.n - 1}")
    lengths = [0] * g.n
    adj = g.adj_bits
    for i in range(g.n):
        vi = order[i]
        row = adj[vi]
        base = lengths[i] + 1
        for j in range(i + 1, g.n):
            if (row >> order[j]) & 1 and base > lengths[j]:
                lengths[j] = base
    return max(lengths, default=0)


def gnp_graph(n: int, p: float, seed: int) -> ConflictGraph:
    """Seeded Erdos-Renyi style graph: each pair is an edge with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must be in [0, 1]")
    rng = random.Random(seed)
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    return ConflictGraph(n=n, edges=frozenset(edges))


@dataclass(frozen=True)
class RatioSample:
    """One draw of the worst-vs-best latency ratio lower bound."""

    n: int
    p: float
    est_longest_path_vertices: int
    est_chromatic: int

    @property
    def ratio(self) -> float:
        return self.est_longest_path_vertices / self.est_chromatic


def ratio_sample(g: ConflictGraph, n: int, p: float, order: Sequence[int] | None = None) -> RatioSample:
    path_edges = est_longest_path(g, order)
    colors = greedy_coloring(g, descending_degree_order(g)).k if g.n else 1
    return RatioSample(
        n=n, p=p, est_longest_path_vertices=path_edges + 1, est_chromatic=max(colors, 1)
    )


@dataclass(frozen=True)
class StudyCell:
    n: int
    p: float
    samples: int
    mean_ratio: float
    min_ratio: float
    max_ratio: float
    seed: int


def _study_cell(args: tuple[int, float, int, int, str]) -> StudyCell:
    n, p, samples, seed, order_mode = args
    ratios = []
    for i in range(samples):
        sample_seed = stable_seed(seed, n, p, i)
        g = gnp_graph(n, p, sample_seed)
        order = None
        if order_mode == "random":
            order = list(range(n))
            random.Random(stable_seed(seed, n, p, i, "order")).shuffle(order)
        ratios.append(ratio_sample(g, n, p, order).ratio)
    return StudyCell(
        n=n,
        p=p,
        samples=samples,
        mean_ratio=sum(ratios) / len(ratios),
        min_ratio=min(ratios),
        max_ratio=max(ratios),
        seed=seed,
    )


def vulnerability_study(
    ns: Sequence[int],
    ps: Sequence[float],
    samples: int,
    seed: int,
    *,
    order_mode: str = "id",
    workers: int = 1,
) -> list[StudyCell]:
    """Mean estimated worst/best latency ratio over seeded random graphs.

    Per-cell seeds derive from (seed, n, p), so serial and parallel runs emit
    identical results in the same deterministic (n, p) order.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    if order_mode not in ("id", "random"):
        raise ValidationError("order_mode must be 'id' or 'random'")
    cells = [(n, p, samples, seed, order_mode) for n in ns for p in ps]
    if workers <= 1:
        return [_study_cell(cell) for cell in cells]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_study_cell, cells))


def study_to_csv(cells: Iterable[StudyCell]) -> str:
    lines = ["n,p,samples,mean_ratio,min_ratio,max_ratio,seed"]
    for cell in cells:
        lines.append(
            f"{cell.n},{cell.p},{cell.samples},{cell.mean_ratio!r},"
            f"{cell.min_ratio!r},{cell.max_ratio!r},{cell.seed}"
        )
    return "\n".join(lines) + "\n"


def concurrency_level_floor(chain_len: int, min_phases: int) -> int:
    """Minimum number of distinct concurrency levels reachable by reordering,
    given the longest conflict chain length and the minimum phase count."""
    if min_phases < 2:
        raise ValidationError("min_phases must be >= 2")
    if chain_len < min_phases:
        raise ValidationError("chain_len must be at least min_phases")
    return math.ceil((chain_len - (min_phases - 1)) / (min_phases - 1))


# ---------------------------------------------------------------------------
# Counterexample searches
# ---------------------------------------------------------------------------

def _min_color_partitions(g: ConflictGraph, k: int, limit: int) -> list[tuple[tuple[int, ...], ...]]:
    """All set partitions of the vertices into exactly k independent sets,
    enumerated canonically (each unordered partition once), up to ``limit``."""
    out: list[tuple[tuple[int, ...], ...]] = []
    parts: list[list[int]] = []
    adj = g.adj_bits

    def rec(v: int) -> None:
        if len(out) >= limit:
            return
        if v == g.n:
            if len(parts) == k:
                out.append(tuple(tuple(p) for p in parts))
            return
        if len(parts) + (g.n - v) < k:
            return
        row = adj[v]
        for part in parts:
            if all(not (row >> u) & 1 for u in part):
                part.append(v)
                rec(v + 1)
                part.pop()
                if len(out) >= limit:
                    return
        if len(parts) < k:
            parts.append([v])
            rec(v + 1)
            parts.pop()

    rec(0)
    return out


@dataclass(frozen=True)
class Witness:
    phenomenon: str
    trial: int
    block_text: str
    detail: str


@dataclass
class CounterexampleReport:
    trials_run: int = 0
    witnesses: dict[str, Witness] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=lambda: {"a": 0, "b": 0, "c": 0})

    def found(self, phenomenon: str) -> bool:
        return phenomenon in self.witnesses


def hetero_counterexample_search(
    n_max: int = 7,
    trials: int = 10_000,
    seed: int = 0,
    *,
    homogeneous: bool = False,
    length_choices: tuple[int, ...] = (1, 2, 5, 10, 100, 1000),
    oracle_cap: int = ORACLE_CAP,
    stop_when: frozenset[str] | None = frozenset({"a", "c"}),
    max_partitions: int = 2000,
) -> CounterexampleReport:
    """Random search for scheduling phenomena on small blocks.

    (a) two minimal colorings whose level schedules differ in latency;
    (b) a minimal coloring whose best reordering still exceeds the optimum,
        or whose reordering changes latency;
    (c) a minimal weighted coloring whose indexed level schedule is
        suboptimal while some minimal unweighted coloring is optimal.

    Finding nothing within the trial budget is an explicit non-result, not an
    error. With ``homogeneous`` all lengths are 1, which serves as the
    control: no (a)-style gap can exist there.
    """
    if n_max > oracle_cap:
        raise CapacityError(f"n_max={n_max} exceeds the oracle cap {oracle_cap}")
    report = CounterexampleReport()
    for trial in range(trials):
        report.trials_run = trial + 1
        rng = random.Random(stable_seed(seed, trial))
        n = rng.randint(4, n_max)
        p = rng.uniform(0.25, 0.75)
        edges = set()
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    edges.add((u, v))
        if not edges:
            continue
        g = ConflictGraph(n=n, edges=frozenset(edges))
        if homogeneous:
            lengths = [1] * n
        else:
            lengths = [rng.choice(length_choices) for _ in range(n)]
        block = block_from_graph(g, lengths)
        length_map = {v: lengths[v] for v in range(n)}
        chi = exact_min_coloring(g).k
        partitions = _min_color_partitions(g, chi, max_partitions)

        lat_of: dict[tuple[int, tuple[int, ...]], int] = {}
        overall_min = None
        overall_max = None
        per_partition: list[tuple[int, int]] = []
        for idx, partition in enumerate(partitions):
            lats = []
            for perm in itertools.permutations(range(chi)):
                ordered = tuple(partition[i] for i in perm)
                lat = latency(level_schedule(ordered, g), length_map)
                lats.append(lat)
                lat_of[(idx, perm)] = lat
            per_partition.append((min(lats), max(lats)))
            overall_min = min(lats) if overall_min is None else min(overall_min, min(lats))
            overall_max = max(lats) if overall_max is None else max(overall_max, max(lats))
        if overall_min is None:
            continue

        if overall_max > overall_min:
            report.counts["a"] += 1
            if "a" not in report.witnesses:
                report.witnesses["a"] = Witness(
                    phenomenon="a",
                    trial=trial,
                    block_text=block_to_text(block),
                    detail=(
                        f"minimal colorings with level latencies {overall_min} and {overall_max}"
                    ),
                )

        needs_oracle = not homogeneous and (
            "b" not in report.witnesses or "c" not in report.witnesses
        )
        if needs_oracle:
            _, min_lt = optimal_schedule_oracle(block, cap=oracle_cap)
            b_hit = None
            for (p_min, p_max) in per_partition:
                if p_min > min_lt:
                    b_hit = f"a minimal coloring whose best reordering is {p_min} > optimum {min_lt}"
                    break
                if p_max > p_min:
                    b_hit = f"a minimal coloring whose reorderings span {p_min}..{p_max}"
                    break
            if b_hit:
                report.counts["b"] += 1
                if "b" not in report.witnesses:
                    report.witnesses["b"] = Witness("b", trial, block_to_text(block), b_hit)

            weighted = exact_min_weighted_coloring(g, length_map)
            lat_weighted = latency(
                level_schedule(partition_from_coloring(weighted), g), length_map
            )
            if lat_weighted > min_lt and overall_min == min_lt:
                report.counts["c"] += 1
                if "c" not in report.witnesses:
                    report.witnesses["c"] = Witness(
                        phenomenon="c",
                        trial=trial,
                        block_text=block_to_text(block),
                        detail=(
                            f"minimal weighted coloring gives latency {lat_weighted} > optimum "
                            f"{min_lt}, while an unweighted minimal coloring reaches {overall_min}"
                        ),
                    )

        if stop_when is not None and stop_when <= set(report.witnesses):
            break
    return report


def homogeneous_reorder_witness_search(
    n_max: int = 6, trials: int = 5000, seed: int = 0
) -> Witness | None:
    """Find a non-minimal partition of a homogeneous block where permuting the
    level order changes the latency."""
    for trial in range(trials):
        rng = random.Random(stable_seed("reorder", seed, trial))
        n = rng.randint(4, n_max)
        p = rng.uniform(0.3, 0.7)
        edges = set()
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    edges.add((u, v))
        if not edges:
            continue
        g = ConflictGraph(n=n, edges=frozenset(edges))
        chi = exact_min_coloring(g).k
        order = list(range(n))
        rng.shuffle(order)
        coloring = greedy_coloring(g, order)
        if coloring.k <= chi:
            continue
        partition = partition_from_coloring(coloring)
        lengths = {v: 1 for v in range(n)}
        lats = set()
        for perm in itertools.permutations(range(coloring.k)):
            ordered = tuple(partition[i] for i in perm)
            lats.add(latency(level_schedule(ordered, g), lengths))
            if len(lats) > 1:
                block = block_from_graph(g, [1] * n)
                return Witness(
                    phenomenon="reorder-non-minimal",
                    trial=trial,
                    block_text=block_to_text(block),
                    detail=(
                        f"partition with {coloring.k} > chi={chi} levels has latencies {sorted(lats)}"
                    ),
                )
    return None
