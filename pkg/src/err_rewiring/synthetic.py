"""Planted-partition datasets for tests, demos and the determinism harness."""
from __future__ import annotations

import numpy as np

from .formats import Dataset
from .graph import connected_components, from_edge_list, strongly_connected_components


def planted_partition(
    n: int = 100,
    n_classes: int = 3,
    n_features: int = 16,
    p_in: float = 0.1,
    p_out: float = 0.01,
    directed: bool = False,
    signal: float = 1.0,
    seed: int = 0,
) -> Dataset:
    """Stochastic block model with class-dependent Gaussian features.

    Components are chained with extra edges so the graph is connected
    (strongly connected in directed mode). Masks split nodes
    20/30/50 into train/val/test with every class present in train.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    p = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    hit = rng.random((n, n)) < p
    np.fill_diagonal(hit, False)
    if not directed:
        hit = np.triu(hit, 1)
    pairs = {(int(u), int(v)) for u, v in zip(*np.nonzero(hit))}
    g = from_edge_list(sorted(pairs), n, directed)
    if directed:
        # a ring through one node per SCC makes the digraph strongly connected
        reps = [min(c) for c in strongly_connected_components(g).components]
    else:
        reps = [min(c) for c in connected_components(g).components]
    if len(reps) > 1:
        extra = [(reps[k], reps[k + 1]) for k in range(len(reps) - 1)]
        if directed:
            extra.append((reps[-1], reps[0]))
        g = g.with_edges_added([e for e in extra if not g.has_edge(*e)])
    centers = rng.normal(size=(n_classes, n_features)) * signal
    x = centers[labels] + rng.normal(size=(n, n_features))
    order = rng.permutation(n)
    masks = {k: np.zeros(n, bool) for k in ("train", "val", "test")}
    n_tr, n_va = max(n_classes, n // 5), (3 * n) // 10
    masks["train"][order[:n_tr]] = True
    masks["val"][order[n_tr:n_tr + n_va]] = True
    masks["test"][order[n_tr + n_va:]] = True
    for c in range(n_classes):
        if not np.any(masks["train"] & (labels == c)):
            i = int(np.flatnonzero(labels == c)[0])
            for k in ("val", "test"):
                masks[k][i] = False
            masks["train"][i] = True
    return Dataset(g, x, labels.astype(np.int64), masks, n_classes).validate()
