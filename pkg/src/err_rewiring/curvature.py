"""Ollivier-Ricci edge curvature with exact Wasserstein-1 transport.

Neighbor measures are uniform over union-neighbors with no self-mass. Ground
distances are hop counts on the symmetrized graph, so transport stays finite
in directed mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lcm
from typing import Optional

import numpy as np

from . import kernels
from .graph import Graph, GraphError, all_pairs_distances, bfs_distances, neighbors, symmetrize

# exact integer arithmetic while lcm of the support sizes stays below this
MAX_INTEGER_SCALE = 2**40
SELF_MASS = 0.0


@dataclass(frozen=True)
class NeighborMeasure:
    support: tuple
    mass: np.ndarray
    denominator: Optional[int] = None

    def __post_init__(self):
        if len(set(self.support)) != len(self.support):
            raise ValueError("support nodes must be distinct")
        if abs(float(np.sum(self.mass)) - 1.0) > 1e-12:
            raise ValueError("measure masses must sum to 1")

    @classmethod
    def point(cls, v: int) -> "NeighborMeasure":
        return cls((int(v),), np.ones(1), 1)

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.mass.tolist()))


@dataclass(frozen=True)
class CurvatureReport:
    edge_values: dict

    def sorted_items(self):
        return sorted(self.edge_values.items())


def neighbor_measure(g: Graph, v: int) -> NeighborMeasure:
    """Uniform measure over ``neighbors(v, union)``."""
    nb = tuple(sorted(neighbors(g, v, "union")))
    if not nb:
        raise GraphError(f"node {v} is isolated; its neighbor measure is undefined")
    k = len(nb)
    return NeighborMeasure(nb, np.full(k, 1.0 / k), k)


def _scaled_masses(mu: NeighborMeasure, nu: NeighborMeasure):
    if mu.denominator and nu.denominator:
        scale = lcm(mu.denominator, nu.denominator)
        if scale <= MAX_INTEGER_SCALE:
            a = np.rint(mu.mass * scale)
            b = np.rint(nu.mass * scale)
            if np.allclose(a / scale, mu.mass, rtol=0, atol=1e-15) and np.allclose(
                b / scale, nu.mass, rtol=0, atol=1e-15
            ):
                return a, b, float(scale), 0.5
    return mu.mass.astype(float), nu.mass.astype(float), 1.0, 1e-12


def transport_cost(mu: NeighborMeasure, nu: NeighborMeasure, cost: np.ndarray) -> float:
    """W1 between two measures given their (|mu|, |nu|) ground-distance block."""
    a, b, scale, eps = _scaled_masses(mu, nu)
    flow, unrouted = kernels.transport_plan(a, b, cost, eps)
    if unrouted > eps:
        raise ArithmeticError("transport problem infeasible")
    return float(np.sum(flow * cost)) / scale


def _ground_block(g_sym: Graph, src, dst, distances=None) -> np.ndarray:
    if distances is not None:
        block = distances[np.ix_(src, dst)].astype(float)
    else:
        block = np.array([bfs_distances(g_sym, s)[list(dst)] for s in src], dtype=float)
    if np.any(block < 0):
        raise GraphError("infinite ground distance between measure supports")
    return block


def wasserstein1(g: Graph, mu: NeighborMeasure, nu: NeighborMeasure, distances=None) -> float:
    """Exact W1 with hop distance as ground metric (min-cost flow)."""
    g_sym = symmetrize(g)
    cost = _ground_block(g_sym, mu.support, nu.support, distances)
    return transport_cost(mu, nu, cost)


def ollivier_ricci_edge(g: Graph, e, distances=None) -> float:
    """``1 - W1(mu_u, mu_v) / d(u, v)``."""
    u, v = e
    if not g.has_edge(u, v):
        raise GraphError(f"edge {e} not present")
    d_uv = 1.0 if distances is None else float(distances[u, v])
    mu, nu = neighbor_measure(g, u), neighbor_measure(g, v)
    return 1.0 - wasserstein1(g, mu, nu, distances) / d_uv


def curvature_all_edges(g: Graph) -> CurvatureReport:
    """Curvature of every stored edge, keyed in sorted edge order."""
    dist = all_pairs_distances(symmetrize(g))
    measures = {}
    out = {}
    for u, v in g.sorted_edges:
        for w in (u, v):
            if w not in measures:
                measures[w] = neighbor_measure(g, w)
        mu, nu = measures[u], measures[v]
        cost = _ground_block(None, mu.support, nu.support, dist)
        out[(u, v)] = 1.0 - transport_cost(mu, nu, cost) / float(dist[u, v])
    return CurvatureReport(out)


def curvature_after_addition(g: Graph, e, added, dist: np.ndarray) -> float:
    """Curvature of edge ``e`` once ``added = (i, j)`` joins the graph.

    ``dist`` is the symmetrized all-pairs hop matrix of ``g``; distances after
    one extra undirected edge are min(d(a,b), d(a,i)+1+d(j,b), d(a,j)+1+d(i,b)).
    """
    u, v = e
    i, j = added
    g2 = g.with_edges_added([added])
    mu, nu = neighbor_measure(g2, u), neighbor_measure(g2, v)
    s, t = list(mu.support), list(nu.support)

    def hops(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, np.inf, x)

    cost = np.minimum(
        hops(dist[np.ix_(s, t)]),
        np.minimum(
            hops(dist[s, i])[:, None] + 1.0 + hops(dist[j, t])[None, :],
            hops(dist[s, j])[:, None] + 1.0 + hops(dist[i, t])[None, :],
        ),
    )
    if not np.all(np.isfinite(cost)):
        raise GraphError("infinite ground distance between measure supports")
    return 1.0 - transport_cost(mu, nu, cost) / min(float(dist[u, v]), 1.0)
