import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contagionlab.errors import InterventionError, InvalidParameterError
from contagionlab.graphs import (EdgeLabel, Graph, complete_graph, cycle_power, erdos_renyi,
                                 graph_stats, path_graph, star_graph, watts_strogatz)
from contagionlab.interventions import (InterventionSpec, add_random, add_triad_closing,
                                        apply_intervention, common_neighbor_count, edge_budget,
                                        rewire, round_half_up, triad_candidates)


def graph_with_m_edges(m, n=60, seed=0):
    rng = np.random.default_rng(seed)
    while True:
        g = erdos_renyi(n, 2 * m / (n * (n - 1)), rng)
        if g.m >= m:
            return g.without_edges(np.arange(m, g.m))


def edge_set(g):
    return set(map(tuple, g.edges.tolist()))


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.4999, 0.0)] == [1, 2, 3, 2, 0]
    assert edge_budget(path_graph(6), 0.1) == 1  # 0.5 rounds up


# -- rewire --------------------------------------------------------------------------

def test_rewire_zero_identity(rng):
    g = cycle_power(20, 2)
    assert rewire(g, 0.0, rng) == g


def test_rewire_100_edges(rng):
    g = graph_with_m_edges(100)
    h = rewire(g, 0.1, rng)
    assert h.m == 100
    new = edge_set(h) - edge_set(g)
    assert len(new) == 10
    assert all(h.edge_label(a, b) == EdgeLabel.RANDOM for a, b in new)


def test_rewire_complete_graph_errors(rng):
    with pytest.raises(InterventionError):
        rewire(complete_graph(5), 0.1, rng)


def test_rewire_does_not_re_add_removed_pairs():
    g = cycle_power(12, 1)
    for seed in range(30):
        h = rewire(g, 0.5, np.random.default_rng(seed))
        removed = edge_set(g) - edge_set(h)
        added = edge_set(h) - edge_set(g)
        assert len(removed) == len(added) == 6
        assert not removed & added


# -- add_random ----------------------------------------------------------------------

def test_add_random_100_edges(rng):
    assert add_random(graph_with_m_edges(100), 0.1, rng).m == 110


def test_add_random_zero_identity(rng):
    g = star_graph(5)
    assert add_random(g, 0, rng) == g


def test_add_random_path_only_non_edge(rng):
    g = path_graph(3)  # a-b-c, 2 edges; 0.25 * 2 rounds to 1
    for seed in range(10):
        h = add_random(g, 0.25, np.random.default_rng(seed))
        assert edge_set(h) - edge_set(g) == {(0, 2)}


def test_add_random_insufficient(rng):
    with pytest.raises(InterventionError):
        add_random(path_graph(3), 1.0, rng)


def test_add_random_uniform_over_non_edges():
    g = path_graph(4)  # non-edges: (0,2), (0,3), (1,3)
    rng = np.random.default_rng(2)
    counts = {}
    draws = 6000
    for _ in range(draws):
        (e,) = edge_set(add_random(g, 1 / 3, rng)) - edge_set(g)
        counts[e] = counts.get(e, 0) + 1
    assert set(counts) == {(0, 2), (0, 3), (1, 3)}
    sd = math.sqrt(draws * (1 / 3) * (2 / 3))
    assert all(abs(c - draws / 3) < 4 * sd for c in counts.values())


def test_add_random_large_sparse_graph_uses_rejection_path(rng):
    g = cycle_power(2000, 2)
    h = add_random(g, 0.1, rng)
    assert h.m == g.m + 400
    assert h.label_count(EdgeLabel.RANDOM) == 400


# -- triad closing -------------------------------------------------------------------

def test_common_neighbor_examples():
    assert common_neighbor_count(complete_graph(3), 0, 2) == 1
    s = star_graph(4)
    assert common_neighbor_count(s, 0, 3) == 0
    assert common_neighbor_count(s, 1, 3) == 1
    with pytest.raises(InvalidParameterError):
        common_neighbor_count(s, 2, 2)


def test_triad_path_single_candidate(rng):
    g = path_graph(3)
    h = add_triad_closing(g, 0.5, rng)
    assert edge_set(h) - edge_set(g) == {(0, 2)}
    assert h.meta["fallback"] == 0


def test_triad_four_cycle_diagonals_equally_likely():
    g = cycle_power(4, 1)
    rng = np.random.default_rng(11)
    draws = 10_000
    hits = sum((0, 2) in edge_set(add_triad_closing(g, 0.25, rng)) for _ in range(draws))
    sd = math.sqrt(draws * 0.25)
    assert abs(hits - draws / 2) < 3 * sd


def test_triad_weights_proportional_to_common_neighbors():
    # 0 and 1 share 2 neighbors, 0 and 4 share 1
    g = Graph(5, [0, 0, 1, 1, 3], [2, 3, 2, 3, 4])
    keys, w = triad_candidates(g)
    weights = {divmod(int(k), 5): int(x) for k, x in zip(keys, w)}
    assert weights[(0, 1)] == 2 and weights[(0, 4)] == 1
    rng = np.random.default_rng(4)
    draws = 9000
    first = sum((0, 1) in edge_set(add_triad_closing(g, 0.2, rng)) for _ in range(draws))
    p = weights[(0, 1)] / sum(weights.values())
    assert abs(first / draws - p) < 4 * math.sqrt(p * (1 - p) / draws)


def test_triad_zero_identity(rng):
    g = cycle_power(10, 2)
    assert add_triad_closing(g, 0.0, rng) == g


def test_triad_fallback_recorded(rng):
    # a perfect matching has no two-paths, so every addition falls back
    g = Graph(8, [0, 2, 4, 6], [1, 3, 5, 7])
    h = add_triad_closing(g, 0.5, rng)
    assert h.m == 6
    assert h.meta["fallback"] == 2


def test_triad_partial_fallback(rng):
    # path 0-1-2-3: two triad candidates, the third addition is the uniform fallback (0,3)
    g = path_graph(4)
    h = add_triad_closing(g, 1.0, rng)
    assert h.m == 6
    assert h.meta["fallback"] == 1


def test_triad_insufficient(rng):
    with pytest.raises(InterventionError):
        add_triad_closing(complete_graph(4), 0.5, rng)


def test_triad_increases_clustering_on_disjoint_paths(rng):
    # 40 disjoint 3-paths: all candidates close a triangle
    u = np.concatenate([np.arange(0, 120, 3), np.arange(1, 120, 3)])
    v = u + 1
    g = Graph(120, u, v)
    before = graph_stats(g)["clustering_coefficient"]
    h = add_triad_closing(g, 0.1, rng)
    assert h.meta["fallback"] == 0
    assert graph_stats(h)["clustering_coefficient"] > before


def test_triad_on_ws_raises_clustering_more_than_random():
    g = watts_strogatz(500, 5, 0.03, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    c_triad = graph_stats(add_triad_closing(g, 0.1, rng))["clustering_coefficient"]
    c_rand = graph_stats(add_random(g, 0.1, rng))["clustering_coefficient"]
    assert c_triad > c_rand


def test_sequential_mode_on_star(rng):
    g = star_graph(6)
    h = add_triad_closing(g, 0.8, rng, sequential=True)
    assert h.m == 9
    assert h.meta["fallback"] == 0


def test_sequential_reweighting_opens_new_candidates():
    # path 0-1-2-3-4: batch candidates are (0,2), (1,3), (2,4); once (0,2) is added,
    # (0,3) closes the triad 0-2-3 and becomes eligible in sequential mode only
    g = path_graph(5)
    rng = np.random.default_rng(0)
    seq = [add_triad_closing(g, 0.5, rng, sequential=True) for _ in range(300)]
    batch = [add_triad_closing(g, 0.5, rng) for _ in range(300)]
    assert all(h.meta["fallback"] == 0 for h in seq + batch)
    assert any(h.has_edge(0, 3) for h in seq)
    assert not any(h.has_edge(0, 3) or h.has_edge(1, 4) for h in batch)


# -- shared properties -----------------------------------------------------------------

graphs = st.builds(
    lambda n, p, seed: erdos_renyi(n, p, np.random.default_rng(seed)),
    st.integers(6, 40), st.floats(0.05, 0.5), st.integers(0, 2**31))


@settings(max_examples=60, deadline=None)
@given(g=graphs, kind=st.sampled_from(["rewire", "add_random", "add_triad_closing"]),
       frac=st.floats(0, 0.5), seed=st.integers(0, 2**31), sequential=st.booleans())
def test_intervention_invariants(g, kind, frac, seed, sequential):
    spec = InterventionSpec(kind, frac, sequential)
    k = round_half_up(frac * g.m)
    free = g.n * (g.n - 1) // 2 - g.m
    if k > free:
        with pytest.raises(InterventionError):
            apply_intervention(g, spec, np.random.default_rng(seed))
        return
    h = apply_intervention(g, spec, np.random.default_rng(seed))
    assert h.n == g.n
    assert np.all(h.edges[:, 0] < h.edges[:, 1])
    assert np.unique(h.edges[:, 0] * h.n + h.edges[:, 1]).size == h.m
    if kind == "rewire":
        assert h.m == g.m
    else:
        assert h.m == g.m + k
        assert edge_set(g) <= edge_set(h)
    again = apply_intervention(g, spec, np.random.default_rng(seed))
    assert again == h and np.array_equal(again.labels, h.labels)


def test_intervention_spec_validation():
    with pytest.raises(InvalidParameterError):
        InterventionSpec("shuffle", 0.1)
    with pytest.raises(InvalidParameterError):
        InterventionSpec("rewire", -0.1)
    assert apply_intervention(star_graph(4), InterventionSpec(), np.random.default_rng(0)) == star_graph(4)
