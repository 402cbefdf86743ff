from __future__ import annotations

import math

import numpy as np
import pytest

from pipal import baselines as bl
from pipal.graph import (
    GraphEdges,
    ImplicitDecomposition,
    build_connectivity,
    build_msf,
    msf_full_edge_set,
    msf_total_weight,
    query_connectivity,
    query_msf_edge,
)
from pipal.runtime import SpaceMeter, meter_scope


def graph_from(n, triples):
    u = np.array([t[0] for t in triples], dtype=np.uint64)
    v = np.array([t[1] for t in triples], dtype=np.uint64)
    w = np.array([t[2] for t in triples], dtype=np.uint64)
    return GraphEdges(n, u, v, w)


def random_graph(rng, n, m, wmax=1 << 40):
    u = rng.integers(0, n, size=m, dtype=np.uint64)
    v = rng.integers(0, n - 1, size=m, dtype=np.uint64)
    v = np.where(v >= u, v + np.uint64(1), v)  # no self-loops
    w = rng.integers(0, wmax, size=m, dtype=np.uint64)
    return GraphEdges(n, u, v, w)


def path_graph(n):
    return graph_from(n, [(i, i + 1, 7 * i + 3) for i in range(n - 1)])


def star_graph(n):
    return graph_from(n, [(0, i, 13 * i + 1) for i in range(1, n)])


def partitions_equal(a, b):
    seen = {}
    for x, y in zip(a, b):
        if x in seen:
            if seen[x] != y:
                return False
        else:
            seen[x] = y
    return len(set(seen.values())) == len(set(a))


def oracle_partition(g, eps=0.5, seed=11):
    o = build_connectivity(g, eps, seed)
    return [query_connectivity(o, x) for x in range(g.n)]


# ---------------------------------------------------------------------------
# decomposition

def test_centers_sampled_at_rate_one_over_k():
    g = random_graph(np.random.default_rng(0), 2000, 10_000)
    dec = ImplicitDecomposition.sample(g, 0.5, seed=3)
    assert dec.k == round(10_000 ** 0.5)
    frac = len(dec.center_ids) / g.n
    assert 0.4 / dec.k < frac < 2.5 / dec.k
    assert np.array_equal(np.flatnonzero(dec.is_center(np.arange(g.n, dtype=np.uint64))),
                          dec.center_ids.astype(np.int64))


# ---------------------------------------------------------------------------
# connectivity

def test_no_edges_every_vertex_own_label():
    g = graph_from(5, [])
    labels = oracle_partition(g)
    assert labels == [0, 1, 2, 3, 4]


def test_path_graph_single_label():
    g = path_graph(400)
    labels = oracle_partition(g)
    assert len(set(labels)) == 1


def test_star_graph_single_label():
    g = star_graph(500)
    labels = oracle_partition(g)
    assert len(set(labels)) == 1


def test_center_queries_label_without_expansion():
    g = path_graph(100)
    o = build_connectivity(g, 0.5, seed=5)
    if len(o.decomposition.center_ids):
        c = int(o.decomposition.center_ids[0])
        assert query_connectivity(o, c) == o.center_label[c]


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_connectivity_matches_union_find(seed):
    rng = np.random.default_rng(seed)
    n, m = 500, 1500
    g = random_graph(rng, n, m)
    ref = bl.union_find_components(n, g.u, g.v).tolist()
    for eps in (0.3, 0.5, 0.7):
        got = oracle_partition(g, eps, seed=seed + 7)
        assert partitions_equal(got, ref)


def test_connectivity_disconnected_forest():
    triples = []
    base = 0
    for size in (1, 2, 5, 17, 40):
        triples += [(base + i, base + i + 1, 1000 + base + i) for i in range(size - 1)]
        base += size
    g = graph_from(base, triples)
    ref = bl.union_find_components(g.n, g.u, g.v).tolist()
    got = oracle_partition(g)
    assert partitions_equal(got, ref)


def test_query_rejects_out_of_range():
    g = path_graph(4)
    o = build_connectivity(g, 0.5, 0)
    with pytest.raises(IndexError):
        query_connectivity(o, 4)


# ---------------------------------------------------------------------------
# minimum spanning forest

def test_triangle_msf():
    g = graph_from(3, [(0, 1, 1), (1, 2, 2), (2, 0, 3)])
    o = build_msf(g, 0.5, seed=1)
    assert msf_full_edge_set(o) == [0, 1]
    assert msf_total_weight(o) == 3
    o.release()


def test_tree_input_all_edges_in_msf():
    g = path_graph(64)
    o = build_msf(g, 0.5, seed=2)
    assert msf_full_edge_set(o) == list(range(g.m))
    o.release()


def test_lightest_edge_in_heaviest_cycle_edge_out():
    g = graph_from(4, [(0, 1, 10), (1, 2, 20), (2, 0, 30), (2, 3, 5)])
    o = build_msf(g, 0.5, seed=3)
    assert query_msf_edge(o, 3)       # unique lightest edge
    assert not query_msf_edge(o, 2)   # heaviest edge of the cycle
    o.release()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_msf_matches_kruskal(seed):
    rng = np.random.default_rng(seed + 100)
    n, m = 300, 1200
    g = random_graph(rng, n, m, wmax=50)  # small weights force tie-breaking
    ref = bl.kruskal_msf(n, g.u, g.v, g.w)
    for eps in (0.3, 0.5, 0.7):
        o = build_msf(g, eps, seed=seed)
        assert msf_full_edge_set(o) == ref
        o.release()


def test_msf_edge_queries_match_kruskal_membership():
    rng = np.random.default_rng(7)
    n, m = 120, 500
    g = random_graph(rng, n, m, wmax=40)
    ref = set(bl.kruskal_msf(n, g.u, g.v, g.w))
    o = build_msf(g, 0.5, seed=9)
    got = {e for e in range(m) if query_msf_edge(o, e)}
    assert got == ref
    o.release()


def test_msf_query_rejects_out_of_range():
    g = path_graph(5)
    o = build_msf(g, 0.5, seed=2)
    with pytest.raises(IndexError):
        query_msf_edge(o, 99)
    o.release()


def test_msf_disconnected():
    triples = [(0, 1, 5), (1, 2, 4), (2, 0, 9), (3, 4, 1)]
    g = graph_from(6, triples)
    o = build_msf(g, 0.5, seed=4)
    assert msf_full_edge_set(o) == [0, 1, 3]
    o.release()


# ---------------------------------------------------------------------------
# space budgets

def test_builds_within_epsilon_budget():
    rng = np.random.default_rng(17)
    n, m = 1000, 10_000
    g = random_graph(rng, n, m)
    for eps in (0.3, 0.5, 0.7):
        k = max(2, round(m ** eps))
        budget = 8 * (m // k + k * max(1, int(math.log2(n))))
        meter = SpaceMeter()

        def body():
            oc = build_connectivity(g, eps, 3)
            om = build_msf(g, eps, 3)
            om.release()

        report = meter_scope(meter, budget, body)
        assert meter.current_words == 0
        assert report.peak_words <= budget, (eps, report.peak_words, budget)
