import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_two_partition, modularity_oracle, random_connected_graph, set_partitions
from upfsim.clustering import (
    Clustering,
    adjust_to_k,
    is_connected,
    kmeans,
    louvain_communities,
    modularity,
    nearest_stations_to_centers,
)
from upfsim.topology import BaseStation, DisconnectedGraphError, NetworkGraph, all_pairs_hop_distances


def make_graph(n, edges):
    stations = tuple(BaseStation(i, float(i), 0.0) for i in range(n))
    return NetworkGraph(stations, frozenset(edges), all_pairs_hop_distances(n, edges))


def clique_edges(nodes):
    nodes = list(nodes)
    return [(u, v) for i, u in enumerate(nodes) for v in nodes[i + 1:]]


TWO_CLIQUES = clique_edges(range(5)) + clique_edges(range(5, 10)) + [(4, 5)]


# -- K-means ----------------------------------------------------------------

def test_kmeans_k_equals_n():
    pts = np.array([[0, 0], [3, 1], [7, 7], [10, 2]], dtype=float)
    cl = kmeans(pts, 4, seed=1)
    assert len(set(cl.assignments.values())) == 4
    assert sorted(map(tuple, cl.centers)) == sorted(map(tuple, pts))


def test_kmeans_k_one_is_centroid():
    pts = np.random.default_rng(0).uniform(0, 100, (30, 2))
    cl = kmeans(pts, 1, seed=3)
    np.testing.assert_allclose(cl.centers[0], pts.mean(axis=0))


def test_kmeans_rejects_bad_k():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


def two_blobs(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal([0, 0], 1.0, (5, 2))
    b = rng.normal([1000, 500], 1.0, (5, 2))
    return np.vstack([a, b])


@pytest.mark.parametrize("seed", range(15))
def test_kmeans_recovers_blobs(seed):
    pts = two_blobs(seed)
    _, best = best_two_partition([tuple(p) for p in pts])
    cl = kmeans(pts, 2, seed=seed)
    first = frozenset(i for i, c in cl.assignments.items() if c == cl.assignments[0])
    assert first in (best, frozenset(range(10)) - best)
    assert first == frozenset(range(5))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_kmeans_objective_non_increasing(seed, k):
    pts = np.random.default_rng(seed).uniform(0, 1000, (25, 2))
    cl = kmeans(pts, k, seed=seed)
    hist = cl.inertia_history
    assert all(b <= a + 1e-6 for a, b in zip(hist, hist[1:]))
    assert cl.k == k


def test_kmeans_deterministic():
    pts = np.random.default_rng(9).uniform(0, 1000, (50, 2))
    a, b = kmeans(pts, 5, seed=42), kmeans(pts, 5, seed=42)
    assert a.assignments == b.assignments
    np.testing.assert_array_equal(a.centers, b.centers)


def test_kmeans_with_ids():
    pts = np.array([[0, 0], [1, 0], [100, 0]], dtype=float)
    cl = kmeans(pts, 2, seed=0, ids=[7, 3, 12])
    assert set(cl.assignments) == {7, 3, 12}
    assert cl.assignments[7] == cl.assignments[3] != cl.assignments[12]


# -- nearest station mapping ------------------------------------------------

XY = np.array([[0, 0], [10, 0], [20, 0], [5, 5], [100, 100], [0, 40], [7, 0], [10, 40]], dtype=float)


def test_centers_on_stations():
    assert nearest_stations_to_centers(XY[[4, 1, 2]], XY) == [4, 1, 2]


def test_identical_centers_take_next_nearest():
    # both centers sit at (1, 0): station 0 is nearest (1 m), station 6 next (6 m)
    assert nearest_stations_to_centers([[1, 0], [1, 0]], XY) == [0, 6]


def test_equidistant_center_picks_lowest_id():
    # (5, 40) is 5 m from both station 5 and station 7
    assert nearest_stations_to_centers([[5, 40]], XY) == [5]


def test_too_many_centers():
    with pytest.raises(ValueError):
        nearest_stations_to_centers(np.zeros((3, 2)), XY[:2])


# -- modularity / Louvain ---------------------------------------------------

def test_modularity_matches_networkx():
    rng = random.Random(1)
    edges = random_connected_graph(12, rng)
    assign = {i: rng.randrange(3) for i in range(12)}
    g = nx.Graph(edges)
    groups = [{i for i in range(12) if assign[i] == c} for c in set(assign.values())]
    assert modularity(12, edges, assign) == pytest.approx(nx.community.modularity(g, groups))


def test_complete_graph_single_community():
    g = make_graph(5, clique_edges(range(5)))
    assert louvain_communities(g).k == 1


def test_two_cliques_match_exhaustive_optimum():
    g = make_graph(10, TWO_CLIQUES)
    best = max(set_partitions(range(10)), key=lambda p: modularity_oracle(10, TWO_CLIQUES, p))
    expected = sorted(sorted(c) for c in best)
    assert expected == [list(range(5)), list(range(5, 10))]
    assert louvain_communities(g).communities() == expected


def test_louvain_rejects_disconnected():
    g = NetworkGraph(
        tuple(BaseStation(i, 0.0, 0.0) for i in range(4)),
        frozenset([(0, 1), (2, 3)]),
        np.zeros((4, 4), dtype=np.int32),
    )
    with pytest.raises(DisconnectedGraphError):
        louvain_communities(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.3]))
def test_louvain_properties(n, seed, p):
    edges = random_connected_graph(n, random.Random(seed), p)
    g = make_graph(n, edges)
    cl = louvain_communities(g)
    singletons = {i: i for i in range(n)}
    assert modularity(n, edges, cl.assignments) >= modularity(n, edges, singletons) - 1e-12
    assert set(cl.assignments) == set(range(n))
    for members in cl.communities():
        local = {v: i for i, v in enumerate(members)}
        sub = [(local[u], local[v]) for u, v in edges if u in local and v in local]
        assert is_connected(len(members), sub)


def test_louvain_close_to_networkx_quality():
    rng = random.Random(5)
    for _ in range(10):
        edges = random_connected_graph(60, rng, 0.04)
        ours = modularity(60, edges, louvain_communities(make_graph(60, edges)).assignments)
        ref = nx.community.modularity(nx.Graph(edges), nx.community.louvain_communities(nx.Graph(edges), seed=0))
        assert ours >= ref - 0.05


# -- adjust_to_k ------------------------------------------------------------

def test_adjust_identity():
    g = make_graph(10, TWO_CLIQUES)
    cl = louvain_communities(g)
    assert adjust_to_k(cl, g, 2).communities() == cl.communities()


def test_adjust_merge_to_one():
    g = make_graph(10, TWO_CLIQUES)
    out = adjust_to_k(louvain_communities(g), g, 1)
    assert out.communities() == [list(range(10))]


def test_adjust_merge_picks_most_connected_pair():
    # path 0-1-2-3-4-5 with a triangle 3,4,5: groups {0,1},{2},{3,4,5}
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (3, 5), (2, 4)]
    g = make_graph(6, edges)
    cl = Clustering(assignments={0: 0, 1: 0, 2: 1, 3: 2, 4: 2, 5: 2})
    # {2}-{3,4,5} share two edges, {0,1}-{2} share one
    out = adjust_to_k(cl, g, 2)
    assert out.communities() == [[0, 1], [2, 3, 4, 5]]


def test_adjust_split_clique_uses_betweenness():
    g = make_graph(4, clique_edges(range(4)))
    out = adjust_to_k(louvain_communities(g), g, 2)
    assert out.k == 2


def test_adjust_rejects_large_k():
    g = make_graph(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        adjust_to_k(louvain_communities(g), g, 4)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6), st.data())
def test_adjust_exact_k(n, seed, data):
    edges = random_connected_graph(n, random.Random(seed), 0.15)
    g = make_graph(n, edges)
    k = data.draw(st.integers(1, n))
    out = adjust_to_k(louvain_communities(g), g, k)
    assert out.k == k
    assert sorted(out.assignments) == list(range(n))
    assert sorted(v for c in out.communities() for v in c) == list(range(n))
