"""Simple graphs in directed or undirected mode, plus traversal and structure predicates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Optional

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

Edge = tuple[int, int]
NeighborKind = Literal["in", "out", "union"]


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple graph.

    ``edges`` holds ordered pairs; in undirected mode each pair is stored once
    with ``u < v``. Adjacency lists and CSR arrays are built lazily, sorted, so
    every iteration order is deterministic.
    """

    n_nodes: int
    edges: frozenset
    directed: bool

    @property
    def mode(self) -> str:
        return "directed" if self.directed else "undirected"

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return self.n_nodes

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n_nodes, self.directed, self.edges) == (
            other.n_nodes,
            other.directed,
            other.edges,
        )

    def __hash__(self) -> int:
        return hash((self.n_nodes, self.directed, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges}, mode={self.mode!r})"

    def canonical(self, u: int, v: int) -> Edge:
        if self.directed or u < v:
            return (u, v)
        return (v, u)

    def has_edge(self, u: int, v: int) -> bool:
        return self.canonical(u, v) in self.edges

    @cached_property
    def sorted_edges(self) -> tuple:
        return tuple(sorted(self.edges))

    @cached_property
    def _adjacency(self):
        out = [[] for _ in range(self.n_nodes)]
        inc = [[] for _ in range(self.n_nodes)]
        for u, v in self.sorted_edges:
            out[u].append(v)
            inc[v].append(u)
            if not self.directed:
                out[v].append(u)
                inc[u].append(v)
        out = tuple(tuple(sorted(a)) for a in out)
        inc = tuple(tuple(sorted(a)) for a in inc)
        if self.directed:
            union = tuple(tuple(sorted(set(a) | set(b))) for a, b in zip(out, inc))
        else:
            union = out
        return {"out": out, "in": inc, "union": union}

    def adjacency(self, kind: NeighborKind = "out") -> tuple:
        return self._adjacency[kind]

    def csr(self, kind: NeighborKind = "out") -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) for the requested neighbor relation, int64."""
        cache = self.__dict__.setdefault("_csr_cache", {})
        if kind not in cache:
            adj = self.adjacency(kind)
            lens = np.fromiter((len(a) for a in adj), dtype=np.int64, count=self.n_nodes)
            indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
            np.cumsum(lens, out=indptr[1:])
            indices = np.fromiter(
                (v for a in adj for v in a), dtype=np.int64, count=int(indptr[-1])
            )
            cache[kind] = (indptr, indices)
        return cache[kind]

    def degrees(self, kind: NeighborKind = "out") -> np.ndarray:
        indptr, _ = self.csr(kind)
        return np.diff(indptr)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense 0/1 matrix, ``A[u, v] = 1`` for edge u -> v (symmetric if undirected)."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        if self.edges:
            e = np.array(self.sorted_edges, dtype=np.int64)
            a[e[:, 0], e[:, 1]] = 1.0
            if not self.directed:
                a[e[:, 1], e[:, 0]] = 1.0
        return a

    def with_edges_added(self, pairs: Iterable[Edge]) -> "Graph":
        new = set(self.edges)
        for u, v in pairs:
            _check_pair(u, v, self.n_nodes)
            new.add(self.canonical(u, v))
        return Graph(self.n_nodes, frozenset(new), self.directed)

    def with_edges_removed(self, pairs: Iterable[Edge]) -> "Graph":
        new = set(self.edges)
        for u, v in pairs:
            e = self.canonical(u, v)
            if e not in new:
                raise GraphError(f"edge {e} not present")
            new.discard(e)
        return Graph(self.n_nodes, frozenset(new), self.directed)

    def subgraph(self, nodes) -> tuple["Graph", np.ndarray]:
        """Induced subgraph on ``nodes`` (relabelled 0..k-1 in sorted order) and the node map."""
        nodes = np.array(sorted(int(x) for x in nodes), dtype=np.int64)
        index = {int(v): i for i, v in enumerate(nodes)}
        sub = frozenset(
            (index[u], index[v]) for u, v in self.edges if u in index and v in index
        )
        return Graph(len(nodes), sub, self.directed), nodes


def _check_pair(u, v, n):
    if not (0 <= u < n and 0 <= v < n):
        raise GraphError(f"node index out of range in pair ({u}, {v}) for n_nodes={n}")
    if u == v:
        raise GraphError(f"self-loop ({u}, {v}) not allowed")


def from_edge_list(pairs: Iterable[Edge], n_nodes: int, directed: bool) -> Graph:
    """Build a deduplicated Graph; undirected pairs are canonicalized to ``u < v``."""
    if n_nodes <= 0:
        raise GraphError("n_nodes must be positive")
    edges = set()
    for u, v in pairs:
        u, v = int(u), int(v)
        _check_pair(u, v, n_nodes)
        edges.add((u, v) if directed or u < v else (v, u))
    return Graph(int(n_nodes), frozenset(edges), bool(directed))


def neighbors(g: Graph, v: int, kind: NeighborKind = "union") -> frozenset:
    if not 0 <= v < g.n_nodes:
        raise GraphError(f"node {v} out of range")
    return frozenset(g.adjacency(kind)[v])


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source`` along edge direction; -1 where unreachable."""
    indptr, indices = g.csr("out")
    return kernels.bfs_distances(indptr, indices, source)


def all_pairs_distances(g: Graph) -> np.ndarray:
    """(n, n) int32 hop distances along edge direction; -1 where unreachable."""
    indptr, indices = g.csr("out")
    return kernels.all_pairs_bfs(indptr, indices)


def shortest_path_distance(g: Graph, i: int, j: int) -> Optional[int]:
    """BFS hop count from i to j, or ``None`` when j is unreachable."""
    if i == j:
        return 0
    d = int(bfs_distances(g, i)[j])
    return None if d < 0 else d


@dataclass(frozen=True)
class SccDecomposition:
    """Components numbered in order of their smallest node."""

    component_id: np.ndarray
    components: tuple
    condensation_edges: frozenset = field(default=frozenset())

    @property
    def n_components(self) -> int:
        return len(self.components)

    def same(self, i: int, j: int) -> bool:
        return self.component_id[i] == self.component_id[j]


def _canonical_labels(raw: np.ndarray) -> np.ndarray:
    # relabel so component k is the one whose smallest node is k-th smallest
    order = {}
    out = np.empty_like(raw)
    for v, c in enumerate(raw.tolist()):
        if c not in order:
            order[c] = len(order)
        out[v] = order[c]
    return out


def strongly_connected_components(g: Graph) -> SccDecomposition:
    """SCCs (directed) or connected components (undirected)."""
    indptr, indices = g.csr("out")
    raw, _ = kernels.tarjan_scc(indptr, indices)
    comp = _canonical_labels(raw)
    k = int(comp.max()) + 1 if g.n_nodes else 0
    members = [[] for _ in range(k)]
    for v, c in enumerate(comp.tolist()):
        members[c].append(v)
    cond = frozenset(
        (int(comp[u]), int(comp[v])) for u, v in g.edges if comp[u] != comp[v]
    )
    if not g.directed:
        cond = frozenset()
    return SccDecomposition(comp, tuple(tuple(m) for m in members), cond)


def connected_components(g: Graph) -> SccDecomposition:
    """Weakly connected components (components of the symmetrized graph)."""
    return strongly_connected_components(symmetrize(g) if g.directed else g)


def is_connected(g: Graph) -> bool:
    return connected_components(g).n_components == 1


def bridges(g: Graph) -> frozenset:
    """Undirected edges whose removal disconnects their component."""
    if g.directed:
        raise GraphError("bridges are defined for undirected graphs")
    indptr, indices = g.csr("out")
    return frozenset(map(tuple, kernels.find_bridges(indptr, indices).tolist()))


def removal_preserves_connectivity(g: Graph, e: Edge, bridge_set=None) -> bool:
    """True iff removing undirected edge ``e`` keeps its component connected.

    Pass a precomputed ``bridge_set`` when testing many edges of one graph.
    """
    if g.directed:
        raise GraphError("removal_preserves_connectivity expects an undirected graph")
    e = g.canonical(*e)
    if e not in g.edges:
        raise GraphError(f"edge {e} not present")
    if bridge_set is None:
        bridge_set = bridges(g)
    return e not in bridge_set


def removal_preserves_scc(g: Graph, e: Edge, scc: Optional[SccDecomposition] = None) -> bool:
    """True iff removing arc ``u -> v`` leaves the SCC holding both endpoints intact.

    The SCC survives exactly when u still reaches v without the arc. Arcs
    between different SCCs cannot split one, so they return True.
    """
    if not g.directed:
        raise GraphError("removal_preserves_scc expects a directed graph")
    u, v = e
    if (u, v) not in g.edges:
        raise GraphError(f"edge {e} not present")
    if scc is None:
        scc = strongly_connected_components(g)
    if not scc.same(u, v):
        log.debug("arc (%d, %d) joins two SCCs; removal allowed", u, v)
        return True
    indptr, indices = g.csr("out")
    return kernels.reachable_without_arc(indptr, indices, u, v, u, v)


def symmetrize(g: Graph) -> Graph:
    """Undirected graph with edge {u, v} for every arc u -> v (identity on undirected input)."""
    if not g.directed:
        return g
    return Graph(g.n_nodes, frozenset((min(u, v), max(u, v)) for u, v in g.edges), False)


def as_directed(g: Graph) -> Graph:
    """Directed graph with both arcs for every undirected edge."""
    if g.directed:
        return g
    arcs = set(g.edges) | {(v, u) for u, v in g.edges}
    return Graph(g.n_nodes, frozenset(arcs), True)
