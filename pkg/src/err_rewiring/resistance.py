"""Effective resistance (undirected and directed), resistance per hop, admissible pairs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from . import kernels
from .graph import (
    Graph,
    GraphError,
    SccDecomposition,
    all_pairs_distances,
    connected_components,
    strongly_connected_components,
)
from .linalg import (
    LyapunovError,
    laplacian_pseudoinverse,
    lyapunov_solve,
    orthonormal_complement_basis,
)

log = logging.getLogger(__name__)


class DisconnectedGraphError(GraphError):
    pass


@dataclass(frozen=True)
class ResistanceReport:
    """Pairwise values stored densely; NaN marks pairs outside the report.

    ``scope`` is ``"all_pairs"``, ``"within_component"`` (undirected graph
    handled per connected component) or ``"within_scc"`` (directed).
    The diagonal is NaN; R_ii is implicitly 0.
    """

    mode: str
    scope: str
    values: np.ndarray
    scc: Optional[SccDecomposition] = None

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def __contains__(self, pair) -> bool:
        i, j = pair
        return i != j and not np.isnan(self.values[i, j])

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        v = self.values[i, j]
        if np.isnan(v):
            raise KeyError((i, j))
        return float(v)

    def pairs(self, ordered: Optional[bool] = None) -> Iterator[tuple[int, int, float]]:
        """Defined pairs in (i, j) order; undirected reports yield i < j only by default."""
        if ordered is None:
            ordered = self.mode == "directed"
        mask = ~np.isnan(self.values)
        if not ordered:
            mask &= np.triu(np.ones_like(mask), 1)
        for i, j in zip(*np.nonzero(mask)):
            yield int(i), int(j), float(self.values[i, j])

    @property
    def pair_values(self) -> dict:
        return {(i, j): v for i, j, v in self.pairs()}


def laplacian(g: Graph) -> np.ndarray:
    """``D - A``; out-degrees on the diagonal for directed graphs."""
    a = g.adjacency_matrix()
    return np.diag(a.sum(axis=1)) - a


def _resistance_from_gram(x: np.ndarray) -> np.ndarray:
    # (e_i - e_j)^T X (e_i - e_j) = X_ii + X_jj - X_ij - X_ji
    d = np.diag(x)
    r = d[:, None] + d[None, :] - x - x.T
    np.fill_diagonal(r, 0.0)
    return np.maximum(r, 0.0)


def effective_resistance_undirected(g: Graph, per_component: bool = False) -> ResistanceReport:
    """All-pairs resistance from one Laplacian pseudoinverse.

    A disconnected graph raises unless ``per_component`` is set, in which case
    each connected component is solved on its own and cross-component pairs
    are left undefined.
    """
    if g.directed:
        raise GraphError("effective_resistance_undirected expects an undirected graph")
    comps = connected_components(g)
    n = g.n_nodes
    values = np.full((n, n), np.nan)
    if comps.n_components > 1 and not per_component:
        raise DisconnectedGraphError(
            f"graph has {comps.n_components} connected components; resistance is "
            "infinite across them"
        )
    if comps.n_components == 1:
        values = _resistance_from_gram(laplacian_pseudoinverse(laplacian(g)))
    else:
        for members in comps.components:
            if len(members) < 2:
                continue
            sub, idx = g.subgraph(members)
            r = _resistance_from_gram(laplacian_pseudoinverse(laplacian(sub)))
            values[np.ix_(idx, idx)] = r
    np.fill_diagonal(values, np.nan)
    scope = "all_pairs" if comps.n_components == 1 else "within_component"
    return ResistanceReport("undirected", scope, values, comps if per_component else None)


def directed_resistance_block(lap: np.ndarray) -> np.ndarray:
    """Resistance matrix of one strongly connected digraph from its out-Laplacian.

    ``Lbar = Q L Q^T``, ``Lbar S + S Lbar^T = I``, ``X = 2 Q^T S Q``.
    """
    m = lap.shape[0]
    if m == 1:
        return np.zeros((1, 1))
    q = orthonormal_complement_basis(m)
    lbar = q @ lap @ q.T
    sigma = lyapunov_solve(lbar)
    x = 2.0 * q.T @ sigma @ q
    return _resistance_from_gram(x)


def effective_resistance_directed(g: Graph) -> ResistanceReport:
    """Directed resistance for every ordered pair inside each SCC of size >= 2.

    Each SCC is solved on its induced subgraph; the projected Laplacian of
    the whole graph is not stable once more than one SCC exists.
    """
    if not g.directed:
        raise GraphError("effective_resistance_directed expects a directed graph")
    scc = strongly_connected_components(g)
    n = g.n_nodes
    values = np.full((n, n), np.nan)
    for cid, members in enumerate(scc.components):
        if len(members) < 2:
            continue
        sub, idx = g.subgraph(members)
        try:
            r = directed_resistance_block(laplacian(sub))
        except LyapunovError as exc:
            raise LyapunovError(f"SCC {cid} (size {len(members)}): {exc}") from exc
        values[np.ix_(idx, idx)] = r
    np.fill_diagonal(values, np.nan)
    return ResistanceReport("directed", "within_scc", values, scc)


def effective_resistance(g: Graph, per_component: bool = True) -> ResistanceReport:
    if g.directed:
        return effective_resistance_directed(g)
    return effective_resistance_undirected(g, per_component=per_component)


def resistance_per_hop(
    report: ResistanceReport, g: Graph, distances: Optional[np.ndarray] = None
) -> ResistanceReport:
    """Divide each defined value by its BFS hop distance; unreachable pairs are dropped."""
    if distances is None:
        distances = all_pairs_distances(g)
    values = report.values.copy()
    defined = ~np.isnan(values)
    unreachable = defined & (distances < 0)
    if np.any(defined & (distances == 0)):
        raise ValueError("zero hop distance between distinct nodes")
    if np.any(unreachable):
        log.debug("dropping %d unreachable pairs", int(unreachable.sum()))
        values[unreachable] = np.nan
    ok = defined & ~unreachable
    values[ok] = values[ok] / distances[ok]
    return replace(report, values=values)


def admissible_pairs(g: Graph) -> set:
    """Unordered distinct pairs (undirected) or ordered same-SCC pairs (directed)."""
    n = g.n_nodes
    if not g.directed:
        return {(i, j) for i in range(n) for j in range(i + 1, n)}
    scc = strongly_connected_components(g)
    out = set()
    for members in scc.components:
        for i in members:
            for j in members:
                if i != j:
                    out.add((i, j))
    return out


def commute_time_estimate(g: Graph, i: int, j: int, n_walks: int = 100_000, seed: int = 0):
    """Monte Carlo commute time between i and j and its standard error.

    On a connected undirected graph the commute time equals ``2 |E| R_ij``,
    which gives an estimate of resistance independent of any linear algebra.
    """
    if g.directed:
        raise GraphError("commute-time sampling expects an undirected graph")
    indptr, indices = g.csr("out")
    if np.any(np.diff(indptr) == 0):
        raise GraphError("random walks need every node to have a neighbor")
    t = kernels.commute_times(indptr, indices, i, j, n_walks, seed)
    return float(t.mean()), float(t.std(ddof=1) / np.sqrt(len(t)))
