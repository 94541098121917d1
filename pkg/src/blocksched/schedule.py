"""Graph schedules: representation, validity, latency, and synthesis.

A graph schedule is an acyclic set of directed dependency edges over a
block's transaction ids. It is valid for a conflict graph when every
conflicting pair is connected by a directed path, which is exactly the
premise the concurrent executor needs to stay serializable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

from .coloring import Coloring
from .conflict import ConflictGraph
from .errors import ValidationError
from .model import Block, Transaction


@dataclass(frozen=True)
class GraphSchedule:
    """Directed acyclic edge set over vertex ids 0..n-1; u -> v means u runs before v."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset(self.edges))
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValidationError(f"self-loop on vertex {u}")
        # acyclicity is part of the type: reject cyclic edge sets on construction
        if len(self.topo_order()) != self.n:
            raise ValidationError("schedule edges contain a cycle")

    @cached_property
    def succs(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            out[u].append(v)
        return tuple(tuple(sorted(vs)) for vs in out)

    @cached_property
    def preds(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            inc[v].append(u)
        return tuple(tuple(sorted(us)) for us in inc)

    def topo_order(self) -> list[int]:
        """Canonical topological order: smallest ready id first."""
        indeg = [0] * self.n
        succs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            indeg[v] += 1
            succs[u].append(v)
        ready = [v for v in range(self.n) if indeg[v] == 0]
        heapq.heapify(ready)
        order: list[int] = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in succs[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(ready, w)
        return order

    @cached_property
    def ancestor_bits(self) -> tuple[int, ...]:
        """Per vertex, the bitset of vertices with a directed path into it."""
        anc = [0] * self.n
        for v in self.topo_order():
            acc = 0
            for u in self.preds[v]:
                acc |= anc[u] | (1 << u)
            anc[v] = acc
        return tuple(anc)

    def has_path(self, u: int, v: int) -> bool:
        return bool((self.ancestor_bits[v] >> u) & 1)


@dataclass(frozen=True)
class BatchSchedule:
    """Ordered sequence of conflict-free batches; batches run strictly one after another."""

    batches: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        normalized = tuple(tuple(sorted(batch)) for batch in self.batches)
        object.__setattr__(self, "batches", normalized)
        seen: set[int] = set()
        for i, batch in enumerate(normalized):
            if not batch:
                raise ValidationError(f"batch {i} is empty")
            for v in batch:
                if v in seen:
                    raise ValidationError(f"vertex {v} appears in more than one batch")
                seen.add(v)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(v for batch in self.batches for v in batch)


@dataclass(frozen=True)
class LatencyReport:
    block_latency: int
    per_tx_finish: dict[int, int]
    mean_latency: float
    p95_latency: int


def _check_lengths(lengths: Mapping[int, int], n: int) -> None:
    for v in range(n):
        if v not in lengths:
            raise ValidationError(f"missing length for vertex {v}")
        if lengths[v] < 1:
            raise ValidationError(f"length of vertex {v} must be positive")


def is_valid_schedule(s: GraphSchedule, g: ConflictGraph) -> bool:
    """True iff every conflict edge is covered by a directed path in s."""
    if s.n != g.n:
        raise ValidationError(f"schedule has {s.n} vertices, conflict graph has {g.n}")
    anc = s.ancestor_bits
    return all((anc[v] >> u) & 1 or (anc[u] >> v) & 1 for u, v in g.edges)


def finish_times(s: GraphSchedule, lengths: Mapping[int, int]) -> list[int]:
    """Per vertex, the maximum weighted path length ending at it (inclusive)."""
    _check_lengths(lengths, s.n)
    finish = [0] * s.n
    for v in s.topo_order():
        best = 0
        for u in s.preds[v]:
            if finish[u] > best:
                best = finish[u]
        finish[v] = best + lengths[v]
    return finish


def latency(s: GraphSchedule, lengths: Mapping[int, int]) -> int:
    """Maximum vertex-weighted path length of the scheduling DAG.

    Equals the makespan of executing the schedule with unbounded workers; an
    isolated vertex counts as a one-vertex path.
    """
    if s.n == 0:
        return 0
    return max(finish_times(s, lengths))


def latency_stats(s: GraphSchedule, lengths: Mapping[int, int]) -> LatencyReport:
    if s.n == 0:
        return LatencyReport(block_latency=0, per_tx_finish={}, mean_latency=0.0, p95_latency=0)
    finish = finish_times(s, lengths)
    ordered = sorted(finish)
    rank = max(1, -(-95 * s.n // 100))  # nearest-rank 95th percentile
    return LatencyReport(
        block_latency=ordered[-1],
        per_tx_finish={v: finish[v] for v in range(s.n)},
        mean_latency=sum(finish) / s.n,
        p95_latency=ordered[rank - 1],
    )


def _normalize_partition(partition: Sequence[Sequence[int]], g: ConflictGraph) -> tuple[tuple[int, ...], ...]:
    levels = tuple(tuple(sorted(level)) for level in partition)
    seen: set[int] = set()
    for i, level in enumerate(levels):
        for v in level:
            if not 0 <= v < g.n:
                raise ValidationError(f"level {i}: vertex {v} out of range")
            if v in seen:
                raise ValidationError(f"vertex {v} appears in more than one level")
            seen.add(v)
        for a_idx, u in enumerate(level):
            row = g.adj_bits[u]
            for v in level[a_idx + 1 :]:
                if (row >> v) & 1:
                    raise ValidationError(f"level {i} is not conflict-free: pair ({u}, {v}) conflicts")
    if len(seen) != g.n:
        raise ValidationError("partition does not cover all vertices")
    return levels


def level_schedule(partition: Sequence[Sequence[int]], g: ConflictGraph) -> GraphSchedule:
    """Build a valid schedule from an ordered partition into conflict-free sets.

    Levels run earliest first. A conflict edge from an earlier level into the
    current one is added only when no dependency path already connects the
    pair, scanning prior levels from nearest to farthest; the result carries
    no redundant edges.
    """
    levels = _normalize_partition(partition, g)
    edges: set[tuple[int, int]] = set()
    anc = [0] * g.n  # incremental ancestor bitsets of the schedule built so far
    for i in range(len(levels)):
        current = levels[i]
        for j in range(i - 1, -1, -1):
            batch: list[tuple[int, int]] = []
            for u in levels[j]:
                row = g.adj_bits[u]
                for v in current:
                    if (row >> v) & 1 and not (anc[v] >> u) & 1:
                        batch.append((u, v))
            for u, v in batch:
                edges.add((u, v))
                anc[v] |= anc[u] | (1 << u)
    return GraphSchedule(n=g.n, edges=frozenset(edges))


def total_order_schedule(block: Block | Sequence[Transaction], g: ConflictGraph) -> GraphSchedule:
    """Baseline: direct every conflict edge by block list order, keeping all edges."""
    txs = block.txs if isinstance(block, Block) else tuple(block)
    if len(txs) != g.n:
        raise ValidationError(f"block has {len(txs)} transactions, conflict graph has {g.n}")
    position = {tx.id: idx for idx, tx in enumerate(txs)}
    edges = set()
    for u, v in g.edges:
        if position[u] < position[v]:
            edges.add((u, v))
        else:
            edges.add((v, u))
    return GraphSchedule(n=g.n, edges=frozenset(edges))


def batch_to_graph(b: BatchSchedule) -> GraphSchedule:
    """Full bipartite dependency edges between consecutive batches."""
    ids = b.ids
    n = len(ids)
    if ids and ids != frozenset(range(n)):
        raise ValidationError(f"batches must cover ids 0..{n - 1}")
    edges: set[tuple[int, int]] = set()
    for earlier, later in zip(b.batches, b.batches[1:]):
        for u in earlier:
            for v in later:
                edges.add((u, v))
    return GraphSchedule(n=n, edges=frozenset(edges))


def batch_latency(b: BatchSchedule, lengths: Mapping[int, int]) -> int:
    """Sum over batches of the longest member length."""
    total = 0
    for batch in b.batches:
        total += max(lengths[v] for v in batch)
    return total


def reorder_partition(
    partition: Sequence[Sequence[int]], perm: Sequence[int]
) -> tuple[tuple[int, ...], ...]:
    """Same sets in a new order; perm gives 1-based source indices per target slot."""
    k = len(partition)
    if sorted(perm) != list(range(1, k + 1)):
        raise ValidationError(f"perm must be a permutation of 1..{k}")
    return tuple(tuple(sorted(partition[p - 1])) for p in perm)


def size_descending_color_order(coloring: Coloring) -> tuple[tuple[int, ...], ...]:
    """Partition ordered by descending color-class size; ties go to the class
    with the smallest member id, then to the lower color index."""
    levels: dict[int, list[int]] = {}
    for v, c in enumerate(coloring.colors):
        levels.setdefault(c, []).append(v)
    ordered = sorted(levels.items(), key=lambda item: (-len(item[1]), min(item[1]), item[0]))
    return tuple(tuple(sorted(members)) for _, members in ordered)


def dump_schedule(s: GraphSchedule) -> str:
    """Header ``n k`` with the edge count, then directed ``u v`` lines, sorted."""
    lines = [f"{s.n} {len(s.edges)}"]
    lines.extend(f"{u} {v}" for u, v in sorted(s.edges))
    return "\n".join(lines) + "\n"


def dump_levels(partition: Sequence[Sequence[int]]) -> str:
    """One line per level listing its ids."""
    return "".join(" ".join(str(v) for v in sorted(level)) + "\n" for level in partition)
