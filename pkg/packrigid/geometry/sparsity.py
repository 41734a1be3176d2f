"""Contact graphs, pebble-game sparsity, planarity and graph generators."""

from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from ..const import SparsityVerdict

_LOGGER = logging.getLogger(__name__)


class GraphError(Exception):
    """Malformed graph or unsatisfiable graph request."""


class ContactGraph:
    """Immutable simple graph on vertices 0..n-1 with stable edge indices."""

    def __init__(
        self,
        n: int,
        edges: Iterable[Sequence[int]],
        outer: Sequence[int] | None = None,
    ) -> None:
        if n < 1:
            raise GraphError(f"graph needs at least one vertex, got n={n}")
        normalized: list[tuple[int, int]] = []
        index: dict[tuple[int, int], int] = {}
        for position, edge in enumerate(edges):
            u, v = (int(value) for value in edge)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge {position} ({u}, {v}) has a vertex outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"edge {position} is a loop at {u}")
            key = (min(u, v), max(u, v))
            if key in index:
                raise GraphError(f"edge {position} ({u}, {v}) is repeated")
            index[key] = len(normalized)
            normalized.append(key)
        self._n = int(n)
        self._edges = tuple(normalized)
        self._index = index
        self._neighbors: list[list[int]] = [[] for _ in range(n)]
        for u, v in normalized:
            self._neighbors[u].append(v)
            self._neighbors[v].append(u)
        self._outer: tuple[int, int, int] | None = None
        if outer is not None:
            outer = tuple(int(value) for value in outer)
            if len(outer) != 3 or len(set(outer)) != 3:
                raise GraphError(f"outer triangle {outer} needs three distinct vertices")
            for i in range(3):
                if not self.has_edge(outer[i], outer[(i + 1) % 3]):
                    raise GraphError(f"outer triangle {outer} is not a clique")
            self._outer = outer

    @property
    def n(self) -> int:
        """Return the vertex count."""
        return self._n

    @property
    def m(self) -> int:
        """Return the edge count."""
        return len(self._edges)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Return edges as sorted pairs in index order."""
        return self._edges

    @property
    def outer(self) -> tuple[int, int, int] | None:
        """Return the designated outer triangle, if any."""
        return self._outer

    @property
    def edge_array(self) -> np.ndarray:
        return np.array(self._edges, dtype=int).reshape(-1, 2)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._index

    def edge_index(self, u: int, v: int) -> int:
        """Return the index of edge uv."""
        try:
            return self._index[(min(u, v), max(u, v))]
        except KeyError as exc:
            raise GraphError(f"({u}, {v}) is not an edge") from exc

    def neighbors(self, v: int) -> list[int]:
        return list(self._neighbors[v])

    def degree(self, v: int) -> int:
        return len(self._neighbors[v])

    def subgraph(self, edges: Iterable[Sequence[int]]) -> ContactGraph:
        """Return the spanning subgraph on the given edges of this graph."""
        keep = sorted(self.edge_index(*edge) for edge in edges)
        return ContactGraph(self._n, [self._edges[i] for i in keep])

    def with_outer(self, outer: Sequence[int] | None) -> ContactGraph:
        return ContactGraph(self._n, self._edges, outer)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self._n))
        graph.add_edges_from(self._edges)
        return graph

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContactGraph):
            return NotImplemented
        return (self._n, set(self._edges), self._outer) == (
            other.n,
            set(other.edges),
            other.outer,
        )

    def __hash__(self) -> int:
        return hash((self._n, frozenset(self._edges), self._outer))

    def __repr__(self) -> str:
        return f"ContactGraph(n={self._n}, m={self.m}, outer={self._outer})"


@dataclass(frozen=True)
class SparsityCertificate:
    """Verdict of the (2,k) pebble game, with a violating witness."""

    verdict: SparsityVerdict
    k: int
    witness: frozenset[int] | None = None
    witness_edges: int = 0

    @property
    def is_sparse(self) -> bool:
        return self.verdict is not SparsityVerdict.Violating

    @property
    def is_tight(self) -> bool:
        return self.verdict is SparsityVerdict.Tight


class PebbleGame:
    """Incremental (2,k) pebble game with two pebbles per vertex."""

    def __init__(self, n: int, k: int) -> None:
        if k not in (2, 3):
            raise GraphError(f"pebble game supports k in (2, 3), got {k}")
        self._k = k
        self._pebbles = [2] * n
        self._out: list[set[int]] = [set() for _ in range(n)]

    def _collect(self, u: int, v: int) -> bool:
        """Move one pebble to u along reversed edges without touching v."""
        seen = {u, v}
        parent: dict[int, int] = {}
        stack = [u]
        while stack:
            a = stack.pop()
            for b in sorted(self._out[a]):
                if b in seen:
                    continue
                seen.add(b)
                parent[b] = a
                if self._pebbles[b] > 0:
                    self._pebbles[b] -= 1
                    node = b
                    while node != u:
                        prev = parent[node]
                        self._out[prev].discard(node)
                        self._out[node].add(prev)
                        node = prev
                    self._pebbles[u] += 1
                    return True
                stack.append(b)
        return False

    def add_edge(self, u: int, v: int) -> bool:
        """Insert uv when k + 1 pebbles can be gathered on its ends."""
        while self._pebbles[u] + self._pebbles[v] < self._k + 1:
            if self._pebbles[u] < 2 and self._collect(u, v):
                continue
            if self._pebbles[v] < 2 and self._collect(v, u):
                continue
            return False
        if self._pebbles[u] > 0:
            self._pebbles[u] -= 1
            self._out[u].add(v)
        else:
            self._pebbles[v] -= 1
            self._out[v].add(u)
        return True

    def reach(self, u: int, v: int) -> frozenset[int]:
        """Return the vertices reachable from u or v along directed edges."""
        seen = {u, v}
        stack = [u, v]
        while stack:
            for b in self._out[stack.pop()]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        return frozenset(seen)


def induced_edge_count(graph: ContactGraph, vertices: Iterable[int]) -> int:
    """Return the number of edges of graph with both ends in vertices."""
    chosen = set(vertices)
    return sum(1 for u, v in graph.edges if u in chosen and v in chosen)


def pebble_sparse(graph: ContactGraph, k: int) -> SparsityCertificate:
    """Decide (2,k)-sparsity and tightness of graph."""
    game = PebbleGame(graph.n, k)
    for u, v in graph.edges:
        if not game.add_edge(u, v):
            witness = game.reach(u, v)
            count = induced_edge_count(graph, witness)
            _LOGGER.debug(
                "Edge (%d, %d) rejected by (2,%d) game, witness of %d vertices",
                u,
                v,
                k,
                len(witness),
            )
            return SparsityCertificate(SparsityVerdict.Violating, k, witness, count)
    if graph.m == 2 * graph.n - k:
        return SparsityCertificate(SparsityVerdict.Tight, k)
    return SparsityCertificate(SparsityVerdict.Sparse, k)


def planar_embedding(graph: ContactGraph) -> nx.PlanarEmbedding | None:
    """Return a combinatorial embedding of graph, or None if not planar."""
    planar, embedding = nx.check_planarity(graph.to_networkx())
    return embedding if planar else None


def is_planar(graph: ContactGraph) -> tuple[bool, dict[int, list[int]] | None]:
    """Return planarity and the rotation system (clockwise neighbor order)."""
    embedding = planar_embedding(graph)
    if embedding is None:
        return False, None
    return True, {v: list(embedding.neighbors_cw_order(v)) for v in embedding}


def graph_faces(graph: ContactGraph) -> list[tuple[int, ...]]:
    """Return the faces of a planar embedding of graph."""
    embedding = planar_embedding(graph)
    if embedding is None:
        raise GraphError("graph is not planar")
    visited: set[tuple[int, int]] = set()
    faces = []
    for u, v in embedding.edges():
        if (u, v) in visited:
            continue
        faces.append(tuple(embedding.traverse_face(u, v, mark_half_edges=visited)))
    return faces


def is_maximal_planar(graph: ContactGraph) -> bool:
    """Return True when graph is a triangulation (every face a triangle)."""
    if graph.n < 3 or graph.m != 3 * graph.n - 6:
        return False
    if planar_embedding(graph) is None:
        return False
    return all(len(face) == 3 for face in graph_faces(graph))


def triangulation_faces(graph: ContactGraph) -> list[tuple[int, int, int]]:
    """Return the triangular faces of a maximal planar graph."""
    if not is_maximal_planar(graph):
        raise GraphError(f"{graph} is not maximal planar")
    return [tuple(face) for face in graph_faces(graph)]


def random_triangulation(n: int, seed, flips: int | None = None) -> ContactGraph:
    """Grow a triangulation from K4 by stacking vertices into inner faces.

    Random edge flips away from the outer triangle (2n by default) then mix
    the result, so every triangulation with outer face (0, 1, 2) can occur.
    """
    if n < 4:
        raise GraphError(f"triangulations need n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]
    faces = [frozenset(face) for face in ((0, 1, 3), (1, 2, 3), (0, 2, 3))]
    for v in range(4, n):
        a, b, c = faces.pop(int(rng.integers(len(faces))))
        faces.extend(frozenset(face) for face in ((a, b, v), (b, c, v), (a, c, v)))
        edges.extend(((a, v), (b, v), (c, v)))

    degree = np.zeros(n, dtype=int)
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    present = set(edges)
    # the three outer edges come first and are never flipped
    for _ in range(2 * n if flips is None else flips):
        index = int(rng.integers(3, len(edges)))
        u, v = edges[index]
        if degree[u] <= 3 or degree[v] <= 3:
            continue
        sides = [face for face in faces if u in face and v in face]
        a, b = (next(iter(face - {u, v})) for face in sides)
        if (min(a, b), max(a, b)) in present:
            continue
        for face in sides:
            faces.remove(face)
        faces.extend((frozenset((a, b, u)), frozenset((a, b, v))))
        present.discard((u, v))
        present.add((min(a, b), max(a, b)))
        edges[index] = (min(a, b), max(a, b))
        degree[[u, v]] -= 1
        degree[[a, b]] += 1
    return ContactGraph(n, edges, outer=(0, 1, 2))


def random_spanning_tree(graph: ContactGraph, rng: np.random.Generator) -> list[int]:
    """Return edge indices of a random spanning tree of a connected graph."""
    weighted = graph.to_networkx()
    weights = rng.random(graph.m)
    for i, (u, v) in enumerate(graph.edges):
        weighted[u][v]["weight"] = weights[i]
    if not nx.is_connected(weighted):
        raise GraphError(f"{graph} is not connected")
    tree = nx.minimum_spanning_tree(weighted, weight="weight")
    return sorted(graph.edge_index(u, v) for u, v in tree.edges())


def random_connected_subgraph(graph: ContactGraph, m: int, seed) -> ContactGraph:
    """Return a connected spanning subgraph of graph with exactly m edges."""
    if not graph.n - 1 <= m <= graph.m:
        raise GraphError(f"edge count {m} outside [{graph.n - 1}, {graph.m}]")
    if m == graph.m:
        return graph
    rng = np.random.default_rng(seed)
    tree = random_spanning_tree(graph, rng)
    rest = sorted(set(range(graph.m)) - set(tree))
    extra = rng.choice(rest, size=m - len(tree), replace=False) if m > len(tree) else []
    keep = sorted(tree + [int(i) for i in extra])
    return ContactGraph(graph.n, [graph.edges[i] for i in keep])


def random_sparse_planar_graph(
    n: int, m: int, seed, k: int = 2
) -> tuple[ContactGraph, ContactGraph]:
    """Return a connected (2,k)-sparse planar graph with m edges and a host triangulation.

    The graph is a random spanning tree of the host plus host edges accepted
    by the pebble game in random order.
    """
    triangulation = random_triangulation(n, seed)
    rng = np.random.default_rng(seed)
    tree = random_spanning_tree(triangulation, rng)
    game = PebbleGame(n, k)
    keep = []
    for i in tree:
        game.add_edge(*triangulation.edges[i])
        keep.append(i)
    for i in rng.permutation(sorted(set(range(triangulation.m)) - set(tree))):
        if len(keep) >= m:
            break
        if game.add_edge(*triangulation.edges[int(i)]):
            keep.append(int(i))
    if len(keep) < m:
        raise GraphError(f"no (2,{k})-sparse subgraph with {m} edges found")
    graph = ContactGraph(n, [triangulation.edges[i] for i in sorted(keep)])
    return graph, triangulation


def embed_in_triangulation(graph: ContactGraph, seed) -> ContactGraph:
    """Add edges to a planar graph until it is maximal planar.

    Edges of graph keep their indices; the first face found becomes the
    outer triangle.
    """
    if graph.n < 3:
        raise GraphError("triangulations need at least three vertices")
    host = graph.to_networkx()
    if not nx.check_planarity(host)[0]:
        raise GraphError(f"{graph} is not planar")
    rng = np.random.default_rng(seed)
    candidates = [
        (u, v)
        for u in range(graph.n)
        for v in range(u + 1, graph.n)
        if not graph.has_edge(u, v)
    ]
    added = []
    for i in rng.permutation(len(candidates)):
        u, v = candidates[int(i)]
        host.add_edge(u, v)
        if nx.check_planarity(host)[0]:
            added.append((u, v))
        else:
            host.remove_edge(u, v)
    triangulation = ContactGraph(graph.n, list(graph.edges) + added)
    faces = triangulation_faces(triangulation)
    return triangulation.with_outer(faces[0])
