import math
import random

import pytest

from blocksched.analysis import (
    CounterexampleReport,
    concurrency_level_floor,
    connected_graph_catalog,
    est_longest_path,
    gnp_graph,
    hetero_counterexample_search,
    homogeneous_reorder_witness_search,
    optimal_latency_all_orientations,
    optimal_schedule_oracle,
    ratio_sample,
    stable_seed,
    study_to_csv,
    transform_graph_to_block,
    vulnerability_study,
)
from blocksched.coloring import descending_degree_order, exact_min_coloring, greedy_coloring
from blocksched.conflict import ConflictGraph, build_conflict_graph
from blocksched.errors import CapacityError, ValidationError
from blocksched.model import block_from_text
from blocksched.schedule import is_valid_schedule, latency, total_order_schedule
from blocksched.workload import block_from_graph, chain_block

from conftest import brute_chromatic, brute_longest_simple_path_edges, random_graph


def test_oracle_chain_of_six_is_two():
    _, best = optimal_schedule_oracle(chain_block(6))
    assert best == 2


def test_oracle_clique_is_serial():
    g = ConflictGraph(n=4, edges=frozenset((i, j) for i in range(4) for j in range(i + 1, 4)))
    _, best = optimal_schedule_oracle(transform_graph_to_block(g, 1))
    assert best == 4


def test_oracle_witness_is_valid_and_achieves_optimum():
    rng = random.Random(2)
    for trial in range(10):
        g = random_graph(rng, 7, 0.5)
        lengths = [rng.choice([1, 10, 100]) for _ in range(7)]
        block = block_from_graph(g, lengths)
        witness, best = optimal_schedule_oracle(block)
        assert is_valid_schedule(witness, build_conflict_graph(block))
        assert latency(witness, {i: lengths[i] for i in range(7)}) == best


def test_oracle_cap():
    with pytest.raises(CapacityError):
        optimal_schedule_oracle(chain_block(11))
    with pytest.raises(CapacityError):
        optimal_latency_all_orientations(chain_block(9))


def test_oracle_is_deterministic():
    block = chain_block(7)
    w1, b1 = optimal_schedule_oracle(block)
    w2, b2 = optimal_schedule_oracle(block)
    assert (w1.edges, b1) == (w2.edges, b2)


def test_double_oracle_cross_check_heterogeneous():
    rng = random.Random(31)
    for trial in range(25):
        n = rng.randint(2, 7)
        g = random_graph(rng, n, 0.5)
        lengths = [rng.choice([1, 10, 100, 1000]) for _ in range(n)]
        block = block_from_graph(g, lengths)
        _, fast = optimal_schedule_oracle(block)
        assert fast == optimal_latency_all_orientations(block)


def test_min_coloring_level_schedule_is_optimal_on_homogeneous_blocks():
    # exact coloring fed through the level scheduler reaches the oracle optimum
    rng = random.Random(41)
    for trial in range(25):
        n = rng.randint(2, 9)
        g = random_graph(rng, n, 0.5)
        block = transform_graph_to_block(g, 1)
        from blocksched.coloring import partition_from_coloring
        from blocksched.schedule import level_schedule

        part = partition_from_coloring(exact_min_coloring(g))
        achieved = latency(level_schedule(part, g), {v: 1 for v in range(n)})
        _, best = optimal_schedule_oracle(block)
        assert achieved == best


def test_transform_round_trips_conflict_graph():
    triangle = ConflictGraph(n=3, edges=frozenset({(0, 1), (0, 2), (1, 2)}))
    block = transform_graph_to_block(triangle, 1)
    assert build_conflict_graph(block) == triangle
    edgeless = ConflictGraph(n=5, edges=frozenset())
    assert build_conflict_graph(transform_graph_to_block(edgeless, 2)).edges == frozenset()


def test_transform_five_cycle_latency_is_three_c():
    c5 = ConflictGraph(n=5, edges=frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)}))
    assert brute_chromatic(5, c5.edges) == 3
    _, best = optimal_schedule_oracle(transform_graph_to_block(c5, 3))
    assert best == 9


def test_est_longest_path_on_path_graph():
    g = ConflictGraph(n=4, edges=frozenset({(0, 1), (1, 2), (2, 3)}))
    assert est_longest_path(g) == 3
    assert brute_longest_simple_path_edges(4, g.edges) == 3


def test_est_longest_path_edgeless_and_clique():
    assert est_longest_path(ConflictGraph(n=3, edges=frozenset())) == 0
    k4 = ConflictGraph(n=4, edges=frozenset((i, j) for i in range(4) for j in range(i + 1, 4)))
    assert est_longest_path(k4) == 3


def test_est_longest_path_validates_order():
    g = ConflictGraph(n=3, edges=frozenset())
    with pytest.raises(ValidationError):
        est_longest_path(g, [0, 1])


def test_est_longest_path_is_a_lower_bound():
    rng = random.Random(17)
    for trial in range(30):
        n = rng.randint(2, 10)
        g = random_graph(rng, n, 0.4)
        order = list(range(n))
        rng.shuffle(order)
        assert est_longest_path(g, order) <= brute_longest_simple_path_edges(n, g.edges)


def test_est_path_plus_one_bounded_by_total_order_latency():
    # the estimator's path never exceeds the unweighted latency of the
    # baseline schedule that follows the same vertex order
    rng = random.Random(23)
    for trial in range(20):
        n = rng.randint(2, 9)
        g = random_graph(rng, n, 0.5)
        block = block_from_graph(g, [1] * n)
        s = total_order_schedule(block, g)
        assert est_longest_path(g) + 1 <= latency(s, {v: 1 for v in range(n)})


def test_greedy_colors_upper_bound_chromatic():
    rng = random.Random(29)
    for trial in range(25):
        n = rng.randint(1, 8)
        g = random_graph(rng, n, 0.5)
        est = greedy_coloring(g, descending_degree_order(g)).k
        assert est >= brute_chromatic(n, g.edges)


def test_gnp_extremes():
    assert gnp_graph(10, 0.0, 1).edges == frozenset()
    full = gnp_graph(10, 1.0, 1)
    assert len(full.edges) == 45


def test_gnp_edge_count_within_four_sigma():
    g = gnp_graph(100, 0.1, seed=123)
    mean = 4950 * 0.1
    sigma = math.sqrt(4950 * 0.1 * 0.9)
    assert abs(len(g.edges) - mean) <= 4 * sigma


def test_gnp_reproducible():
    assert gnp_graph(30, 0.3, 7).edges == gnp_graph(30, 0.3, 7).edges


def test_ratio_sample_p_zero_is_one():
    g = gnp_graph(10, 0.0, 5)
    assert ratio_sample(g, 10, 0.0).ratio == 1.0


def test_vulnerability_study_shapes_and_determinism():
    cells = vulnerability_study([10, 20], [0.0, 0.2], samples=5, seed=3)
    assert [(c.n, c.p) for c in cells] == [(10, 0.0), (10, 0.2), (20, 0.0), (20, 0.2)]
    assert cells[0].mean_ratio == 1.0
    again = vulnerability_study([10, 20], [0.0, 0.2], samples=5, seed=3)
    assert study_to_csv(cells) == study_to_csv(again)


def test_ratio_grows_with_density_at_fixed_n():
    cells = vulnerability_study([100], [0.01, 0.1], samples=20, seed=7)
    assert cells[1].mean_ratio > cells[0].mean_ratio


def test_vulnerability_study_parallel_matches_serial():
    serial = vulnerability_study([12], [0.1, 0.3], samples=4, seed=9, workers=1)
    parallel = vulnerability_study([12], [0.1, 0.3], samples=4, seed=9, workers=2)
    assert study_to_csv(serial) == study_to_csv(parallel)


def test_concurrency_level_floor_values():
    assert concurrency_level_floor(9, 2) == 8
    assert concurrency_level_floor(4, 4) == 1
    assert concurrency_level_floor(10, 4) == 3  # ceil(7/3)


def test_concurrency_level_floor_domain():
    with pytest.raises(ValidationError):
        concurrency_level_floor(5, 1)
    with pytest.raises(ValidationError):
        concurrency_level_floor(2, 3)


def test_hetero_search_finds_a_and_c_quickly():
    report = hetero_counterexample_search(n_max=7, trials=2000, seed=3)
    assert report.found("a") and report.found("c")
    for witness in report.witnesses.values():
        block_from_text(witness.block_text)  # serialized witness parses back


def test_hetero_search_none_found_is_explicit():
    report = hetero_counterexample_search(n_max=4, trials=3, seed=0, stop_when=None)
    assert isinstance(report, CounterexampleReport)
    assert report.trials_run == 3


def test_homogeneous_control_finds_no_a_witnesses_smoke():
    report = hetero_counterexample_search(
        n_max=7, trials=300, seed=3, homogeneous=True, stop_when=None
    )
    assert report.counts["a"] == 0


def test_hetero_search_rejects_nmax_above_cap():
    with pytest.raises(CapacityError):
        hetero_counterexample_search(n_max=11, trials=1)


def test_homogeneous_reorder_witness_exists():
    witness = homogeneous_reorder_witness_search(n_max=6, trials=3000, seed=1)
    assert witness is not None
    block = block_from_text(witness.block_text)
    # the found partition is wider than the chromatic number by construction
    g = build_conflict_graph(block)
    assert exact_min_coloring(g).k < g.n


def test_catalog_counts_match_known_values():
    catalog = connected_graph_catalog(5)
    by_n = {}
    for g in catalog:
        by_n[g.n] = by_n.get(g.n, 0) + 1
    assert by_n == {1: 1, 2: 1, 3: 2, 4: 6, 5: 21}


def test_stable_seed_is_stable():
    assert stable_seed(1, 2.5, "x") == stable_seed(1, 2.5, "x")
    assert stable_seed(1) != stable_seed(2)
