"""Budgeted add/remove rewiring driven by effective resistance or curvature.

Score maps are dense (n, n) float arrays with NaN outside the admissible
pair set. Every argmax/argmin treats values within ``TIE_RTOL`` (relative)
as tied and breaks the tie on the lexicographically smallest pair, so
symmetric graphs rewire the same way regardless of rounding noise.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curvature import curvature_after_addition, neighbor_measure, transport_cost
from .graph import (
    Graph,
    all_pairs_distances,
    bridges,
    neighbors,
    removal_preserves_scc,
    strongly_connected_components,
    symmetrize,
)
from .resistance import effective_resistance, resistance_per_hop

log = logging.getLogger(__name__)

TIE_RTOL = 1e-9

STRATEGIES = (
    "resistance_add_remove",
    "resistance_hop_add_remove",
    "resistance_add_only",
    "resistance_hop_add_only",
    "curvature_add_remove",
    "none",
)


@dataclass(frozen=True)
class RewiringConfig:
    strategy: str = "resistance_add_remove"
    budget_fraction: float = 0.0
    seed: int = 0  # reserved; every strategy is deterministic

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not 0.0 <= self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in [0, 1]")

    @property
    def removes(self) -> bool:
        return self.strategy.endswith("add_remove")

    @property
    def per_hop(self) -> bool:
        return self.strategy.startswith("resistance_hop")

    def budget(self, n_edges: int) -> int:
        return int(math.floor(self.budget_fraction * n_edges + 1e-9))


@dataclass(frozen=True)
class Edit:
    t: int
    action: str  # add | add_pair | remove | skip
    edges: tuple
    score: Optional[float]
    reason: str

    def to_dict(self) -> dict:
        score = None if self.score is None or not math.isfinite(self.score) else self.score
        return {
            "t": self.t,
            "action": self.action,
            "edges": [list(e) for e in self.edges],
            "score": score,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Edit":
        return cls(
            int(d["t"]),
            d["action"],
            tuple(tuple(int(x) for x in e) for e in d["edges"]),
            d.get("score"),
            d.get("reason", ""),
        )


@dataclass
class RewiringState:
    initial: Graph
    graph: Graph
    budget: int
    edits: list = field(default_factory=list)
    added_count: int = 0
    removed_count: int = 0
    error: Optional[str] = None

    def added_edges(self) -> list:
        return [e for ed in self.edits if ed.action in ("add", "add_pair") for e in ed.edges]

    def removed_edges(self) -> list:
        return [e for ed in self.edits if ed.action == "remove" for e in ed.edges]

    def edit_log_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.edits], indent=1)


def replay(g0: Graph, edits) -> Graph:
    """Apply an edit log to ``g0``; skips are ignored."""
    g = g0
    for ed in edits:
        if isinstance(ed, dict):
            ed = Edit.from_dict(ed)
        if ed.action in ("add", "add_pair"):
            g = g.with_edges_added(ed.edges)
        elif ed.action == "remove":
            g = g.with_edges_removed(ed.edges)
    return g


# ---------------------------------------------------------------------------
# scores and selection


def score_map(g: Graph, per_hop: bool = False) -> np.ndarray:
    """Resistance (or resistance per hop) on admissible pairs, NaN elsewhere.

    Undirected graphs with several components are scored per component:
    cross-component resistance is infinite and carries no ranking signal.
    """
    report = effective_resistance(g, per_component=True)
    if per_hop:
        report = resistance_per_hop(report, g)
    return report.values


def _tied(values: np.ndarray, target: float) -> np.ndarray:
    return np.abs(values - target) <= TIE_RTOL * max(1.0, abs(target))


def _best_pair(scores: np.ndarray, directed: bool, largest: bool):
    vals = scores if directed else np.where(np.triu(np.ones(scores.shape, bool), 1), scores, np.nan)
    defined = ~np.isnan(vals)
    if not defined.any():
        return None
    target = np.nanmax(vals) if largest else np.nanmin(vals)
    hits = np.argwhere(defined & _tied(np.where(defined, vals, 0.0), target))
    i, j = hits[0]  # argwhere is row-major: lexicographically smallest
    return int(i), int(j), float(vals[i, j])


@dataclass(frozen=True)
class AdditionPlan:
    pair: tuple
    edges: tuple
    score: float
    detail: str


def select_addition(g: Graph, scores: np.ndarray) -> Optional[AdditionPlan]:
    """Plan the edge(s) to add at the maximally resistant admissible pair.

    Case 1: the pair is not an edge, add it. Case 2: it is; connect each
    endpoint to the other's neighborhood, choosing the neighbor pair with the
    smallest summed score (then smallest ``(n_u, n_v)``). Returns None when
    Case 2 has no valid candidate.
    """
    best = _best_pair(scores, g.directed, largest=True)
    if best is None:
        raise ValueError("empty admissible pair set")
    u, v, s = best
    if not g.has_edge(u, v):
        return AdditionPlan((u, v), ((u, v),), s, f"max score pair ({u}, {v}) not an edge")
    cands = []
    for nu in sorted(neighbors(g, u, "union")):
        for nv in sorted(neighbors(g, v, "union")):
            e1, e2 = (u, nv), (v, nu)
            if u == nv or v == nu:
                continue
            if g.has_edge(*e1) or g.has_edge(*e2):
                continue
            if g.canonical(*e1) == g.canonical(*e2):
                continue
            c1, c2 = scores[e1], scores[e2]
            cost = (np.inf if np.isnan(c1) else c1) + (np.inf if np.isnan(c2) else c2)
            cands.append((cost, nu, nv))
    if not cands:
        return None
    costs = np.array([c[0] for c in cands])
    lowest = costs.min()
    if np.isfinite(lowest):
        pick = [c for c, ok in zip(cands, _tied(costs, lowest)) if ok][0]
    else:
        pick = cands[0]
    _, nu, nv = pick
    return AdditionPlan(
        (u, v),
        ((u, nv), (v, nu)),
        s,
        f"max score pair ({u}, {v}) already an edge; bridging via n_u={nu}, n_v={nv} "
        f"(summed score {pick[0]:.17g})",
    )


def _ranked_edges(g: Graph, scores: np.ndarray, descending: bool):
    items = []
    for u, v in g.sorted_edges:
        s = scores[u, v]
        if not np.isnan(s):
            items.append((float(s), u, v))
    items.sort(key=lambda x: (-x[0], x[1], x[2]) if descending else (x[0], x[1], x[2]))
    # group near-equal scores into one tie class so the (u, v) order decides
    ranked = []
    anchor = None
    bucket = -1
    for s, u, v in items:
        if anchor is None or abs(s - anchor) > TIE_RTOL * max(1.0, abs(anchor)):
            anchor = s
            bucket += 1
        ranked.append((bucket, u, v, s))
    ranked.sort()
    return [(u, v, s) for _, u, v, s in ranked]


def select_removal(g: Graph, scores: np.ndarray, descending: bool = False):
    """First edge, in score order, whose removal keeps connectivity (or the SCC).

    Returns ``(edge, score)`` or None. ``descending`` scans from the highest
    score (used by the curvature baseline).
    """
    ranked = _ranked_edges(g, scores, descending)
    if not ranked:
        return None
    if g.directed:
        scc = strongly_connected_components(g)
        for u, v, s in ranked:
            if removal_preserves_scc(g, (u, v), scc):
                return (u, v), s
        return None
    bridge_set = bridges(g)
    for u, v, s in ranked:
        if (u, v) not in bridge_set:
            return (u, v), s
    return None


# ---------------------------------------------------------------------------
# drivers


def _run(g0: Graph, cfg: RewiringConfig, step) -> RewiringState:
    budget = cfg.budget(g0.n_edges)
    state = RewiringState(initial=g0, graph=g0, budget=budget)
    t = 0
    skips = 0
    try:
        while state.added_count < budget and t < 2 * budget:
            outcome = step(state, t)
            if outcome == "stop":
                break
            if outcome == "skip":
                skips += 1
                if skips >= 2:
                    break
            else:
                skips = 0
            t += 1
    except ArithmeticError as exc:
        state.error = f"{type(exc).__name__} at t={t}: {exc}"
        log.error("rewiring aborted: %s", state.error)
        raise RewiringAborted(state) from exc
    return state


class RewiringAborted(RuntimeError):
    """Numerical failure mid-run; ``state`` keeps the edits made so far."""

    def __init__(self, state: RewiringState):
        super().__init__(state.error)
        self.state = state


def err_rewire(g0: Graph, cfg: RewiringConfig) -> RewiringState:
    """Resistance-guided rewiring under budget ``floor(r * |E0|)`` added edges."""
    if cfg.strategy == "none":
        return RewiringState(initial=g0, graph=g0, budget=cfg.budget(g0.n_edges))
    if cfg.strategy == "curvature_add_remove":
        return curvature_rewire(g0, cfg)

    def step(state: RewiringState, t: int):
        g = state.graph
        scores = score_map(g, cfg.per_hop)
        if np.all(np.isnan(scores)):
            state.edits.append(Edit(t, "skip", (), None, "no admissible pair"))
            return "stop"
        plan = select_addition(g, scores)
        if plan is None:
            state.edits.append(Edit(t, "skip", (), None, "no valid neighbor-bridge candidate"))
            return "skip"
        if state.added_count + len(plan.edges) > state.budget:
            state.edits.append(
                Edit(t, "skip", (), plan.score, "addition would exceed the budget")
            )
            return "stop"
        action = "add" if len(plan.edges) == 1 else "add_pair"
        state.graph = g = g.with_edges_added(plan.edges)
        state.added_count += len(plan.edges)
        state.edits.append(Edit(t, action, plan.edges, plan.score, plan.detail))
        if cfg.removes:
            picked = select_removal(g, score_map(g, cfg.per_hop))
            if picked is None:
                state.edits.append(Edit(t, "skip", (), None, "no removable edge"))
            else:
                e, s = picked
                state.graph = g.with_edges_removed([e])
                state.removed_count += 1
                state.edits.append(Edit(t, "remove", (e,), s, "min score removable edge"))
        return "ok"

    return _run(g0, cfg, step)


def curvature_scores(g: Graph, dist: Optional[np.ndarray] = None) -> np.ndarray:
    """Ollivier-Ricci curvature placed on edge entries of an (n, n) NaN matrix."""
    if dist is None:
        dist = all_pairs_distances(symmetrize(g))
    out = np.full((g.n_nodes, g.n_nodes), np.nan)
    measures = {}
    for u, v in g.sorted_edges:
        for w in (u, v):
            if w not in measures:
                measures[w] = neighbor_measure(g, w)
        mu, nu = measures[u], measures[v]
        cost = dist[np.ix_(mu.support, nu.support)].astype(float)
        out[u, v] = 1.0 - transport_cost(mu, nu, cost)
        if not g.directed:
            out[v, u] = out[u, v]
    return out


def curvature_rewire(g0: Graph, cfg: RewiringConfig) -> RewiringState:
    """Curvature baseline: relieve the most negatively curved edge, prune the most positive.

    For the most negative edge (u, v), add the absent edge (i, j) with
    i in N(u), j in N(v) that maximizes the recomputed curvature of (u, v);
    then remove the highest-curvature edge that passes the preservation
    predicate. Budget accounting matches :func:`err_rewire`.
    """

    def step(state: RewiringState, t: int):
        g = state.graph
        dist = all_pairs_distances(symmetrize(g))
        kappa = curvature_scores(g, dist)
        worst = _best_pair(kappa, True, largest=False)
        if worst is None:
            state.edits.append(Edit(t, "skip", (), None, "graph has no edges"))
            return "stop"
        u, v, k_uv = worst
        seen = set()
        cands = []
        for i in sorted(neighbors(g, u, "union")):
            for j in sorted(neighbors(g, v, "union")):
                if i == j or g.has_edge(i, j):
                    continue
                key = g.canonical(i, j)
                if key in seen:
                    continue
                seen.add(key)
                cands.append((curvature_after_addition(g, (u, v), key, dist), key))
        if not cands:
            state.edits.append(Edit(t, "skip", (), k_uv, f"no candidate around ({u}, {v})"))
            return "skip"
        vals = np.array([c[0] for c in cands])
        tied = [c for c, hit in zip(cands, _tied(vals, vals.max())) if hit]
        k_new, add = min(tied, key=lambda c: c[1])
        if state.added_count + 1 > state.budget:
            return "stop"
        state.graph = g = g.with_edges_added([add])
        state.added_count += 1
        state.edits.append(
            Edit(
                t,
                "add",
                (add,),
                k_uv,
                f"most negative edge ({u}, {v}); curvature after addition {k_new:.17g}",
            )
        )
        picked = select_removal(g, curvature_scores(g), descending=True)
        if picked is None:
            state.edits.append(Edit(t, "skip", (), None, "no removable edge"))
        else:
            e, s = picked
            state.graph = g.with_edges_removed([e])
            state.removed_count += 1
            state.edits.append(Edit(t, "remove", (e,), s, "max curvature removable edge"))
        return "ok"

    return _run(g0, cfg, step)


def rewire(g0: Graph, cfg: RewiringConfig) -> RewiringState:
    return err_rewire(g0, cfg)
