"""Tests for contact graphs, the pebble game and planar graph generation."""
from itertools import combinations

import networkx as nx
import pytest

from packrigid.const import SparsityVerdict
from packrigid.geometry.sparsity import (
    ContactGraph,
    GraphError,
    PebbleGame,
    embed_in_triangulation,
    graph_faces,
    induced_edge_count,
    is_maximal_planar,
    is_planar,
    pebble_sparse,
    random_connected_subgraph,
    random_sparse_planar_graph,
    random_triangulation,
    triangulation_faces,
)


def _atlas_graphs():
    for atlas in nx.graph_atlas_g():
        if atlas.number_of_nodes() >= 2 and atlas.number_of_edges() >= 1:
            yield ContactGraph(atlas.number_of_nodes(), list(atlas.edges()))


def _brute_force_sparse(graph, k):
    for size in range(2, graph.n + 1):
        for subset in combinations(range(graph.n), size):
            if induced_edge_count(graph, subset) > 2 * size - k:
                return False
    return True


@pytest.mark.slow
@pytest.mark.parametrize("k", [2, 3])
def test_pebble_game_matches_brute_force(k):
    """Every graph on at most 7 vertices."""
    checked = 0
    for graph in _atlas_graphs():
        certificate = pebble_sparse(graph, k)
        assert certificate.is_sparse == _brute_force_sparse(graph, k), graph
        if certificate.is_sparse:
            assert certificate.is_tight == (graph.m == 2 * graph.n - k)
        else:
            witness = certificate.witness
            assert certificate.witness_edges == induced_edge_count(graph, witness)
            assert certificate.witness_edges > 2 * len(witness) - k
        checked += 1
    assert checked > 1000


def test_k4_verdicts(k4):
    assert pebble_sparse(k4, 2).verdict is SparsityVerdict.Tight
    assert pebble_sparse(k4, 3).verdict is SparsityVerdict.Violating
    without = k4.subgraph(edge for edge in k4.edges if edge != (0, 3))
    assert pebble_sparse(without, 3).verdict is SparsityVerdict.Tight
    assert pebble_sparse(without, 2).verdict is SparsityVerdict.Sparse


def test_pebble_game_accepts_and_rejects_incrementally():
    game = PebbleGame(2, 3)
    assert game.add_edge(0, 1)
    # a second copy of the edge would need 4 pebbles on {0, 1}
    assert not game.add_edge(0, 1)
    with pytest.raises(GraphError):
        PebbleGame(3, 1)


def test_contact_graph_normalizes_edges():
    graph = ContactGraph(3, [(1, 0), (2, 1)])
    assert graph.edges == ((0, 1), (1, 2))
    assert graph.edge_index(1, 0) == 0
    assert graph.has_edge(2, 1)
    assert graph.degree(1) == 2
    assert graph == ContactGraph(3, [(2, 1), (0, 1)])
    assert graph != ContactGraph(4, [(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        graph.edge_index(0, 2)


@pytest.mark.parametrize(
    "edges,message",
    [
        ([(0, 1), (1, 1)], "edge 1"),
        ([(0, 1), (1, 0)], "edge 1"),
        ([(0, 1), (0, 5)], "edge 1"),
    ],
    ids=["loop", "repeated", "range"],
)
def test_contact_graph_rejects_bad_edges(edges, message):
    with pytest.raises(GraphError, match=message):
        ContactGraph(3, edges)


def test_outer_triangle_must_be_a_clique():
    with pytest.raises(GraphError):
        ContactGraph(4, [(0, 1), (1, 2), (2, 3)], outer=(0, 1, 2))
    graph = ContactGraph(3, [(0, 1), (1, 2), (0, 2)], outer=(2, 0, 1))
    assert graph.outer == (2, 0, 1)
    assert graph.with_outer(None).outer is None


def test_planarity():
    assert is_planar(ContactGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)]))[0]
    k5 = ContactGraph(5, list(combinations(range(5), 2)))
    planar, rotation = is_planar(k5)
    assert not planar
    assert rotation is None
    with pytest.raises(GraphError):
        graph_faces(k5)


@pytest.mark.parametrize("n", [4, 5, 8, 12])
def test_random_triangulation(n):
    graph = random_triangulation(n, seed=n)
    assert graph.m == 3 * n - 6
    assert graph.outer == (0, 1, 2)
    assert is_maximal_planar(graph)
    faces = triangulation_faces(graph)
    assert len(faces) == 2 * n - 4
    assert frozenset((0, 1, 2)) in {frozenset(face) for face in faces}
    assert random_triangulation(n, seed=n) == graph


def test_flips_reach_non_stacked_triangulations():
    """Stacking alone always leaves a degree-3 vertex; the octahedron has none."""
    stacked = random_triangulation(6, seed=0, flips=0)
    assert min(stacked.degree(v) for v in range(6)) == 3
    assert any(
        min(random_triangulation(6, seed).degree(v) for v in range(6)) == 4
        for seed in range(100)
    )


def test_triangulation_needs_four_vertices():
    with pytest.raises(GraphError):
        random_triangulation(3, seed=0)


def test_cycle_is_not_maximal_planar():
    assert not is_maximal_planar(ContactGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)]))
    with pytest.raises(GraphError):
        triangulation_faces(ContactGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)]))


@pytest.mark.parametrize("m", [9, 12, 17])
def test_random_connected_subgraph(m):
    host = random_triangulation(10, seed=3)
    graph = random_connected_subgraph(host, m, seed=4)
    assert graph.m == m
    assert nx.is_connected(graph.to_networkx())
    assert all(host.has_edge(u, v) for u, v in graph.edges)
    with pytest.raises(GraphError):
        random_connected_subgraph(host, 8, seed=4)


@pytest.mark.parametrize("k", [2, 3])
def test_random_sparse_planar_graph(k):
    graph, host = random_sparse_planar_graph(9, 2 * 9 - k, seed=21, k=k)
    assert graph.m == 2 * 9 - k
    assert pebble_sparse(graph, k).is_tight
    assert is_planar(graph)[0]
    assert all(host.has_edge(u, v) for u, v in graph.edges)


def test_embed_in_triangulation_keeps_edge_indices():
    graph = ContactGraph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    host = embed_in_triangulation(graph, seed=2)
    assert is_maximal_planar(host)
    assert host.edges[: graph.m] == graph.edges
    faces = {frozenset(face) for face in triangulation_faces(host)}
    assert frozenset(host.outer) in faces
    with pytest.raises(GraphError):
        embed_in_triangulation(ContactGraph(5, list(combinations(range(5), 2))), seed=0)
