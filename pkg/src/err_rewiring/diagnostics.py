"""Representation diagnostics: |cosine| by class relation, linear CKA, linear probes, edge-set overlap."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MAX_EXACT_PAIRS = 1_000_000


@dataclass
class DiagnosticsReport:
    cosine_same_class: dict = field(default_factory=dict)
    cosine_diff_class: dict = field(default_factory=dict)
    cka: dict = field(default_factory=dict)
    probe_accuracy: dict = field(default_factory=dict)
    edge_overlap: list = field(default_factory=list)


def abs_cosine(u, v) -> float:
    """``|u.v| / (|u| |v|)``, clipped to [0, 1]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(min(1.0, abs(u @ v) / (nu * nv)))


def _pair_cosines(unit, i, j):
    return np.minimum(1.0, np.abs(np.einsum("ij,ij->i", unit[i], unit[j])))


def class_pair_cosine(h, labels, seed: int = 0, max_exact_pairs: int = MAX_EXACT_PAIRS):
    """Mean |cosine| over same-class and different-class node pairs.

    Exact over all unordered pairs when there are at most ``max_exact_pairs``,
    otherwise over that many uniformly sampled distinct pairs. Rows with zero
    norm are dropped first.
    """
    h = np.asarray(h, dtype=float)
    labels = np.asarray(labels)
    norms = np.linalg.norm(h, axis=1)
    keep = norms > 0
    if not keep.all():
        log.info("class_pair_cosine: excluding %d zero-norm embeddings", int((~keep).sum()))
    unit = h[keep] / norms[keep, None]
    lab = labels[keep]
    n = len(lab)
    total = n * (n - 1) // 2
    same_sum = diff_sum = 0.0
    same_n = diff_n = 0
    if total <= max_exact_pairs:
        # row blocks keep memory at O(block * n)
        block = max(1, 4_000_000 // max(n, 1))
        for s in range(0, n, block):
            e = min(n, s + block)
            c = np.minimum(1.0, np.abs(unit[s:e] @ unit.T))
            cols = np.arange(n)[None, :]
            rows = np.arange(s, e)[:, None]
            upper = cols > rows
            same = (lab[s:e, None] == lab[None, :]) & upper
            diff = (lab[s:e, None] != lab[None, :]) & upper
            same_sum += c[same].sum()
            diff_sum += c[diff].sum()
            same_n += int(same.sum())
            diff_n += int(diff.sum())
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_exact_pairs)
        j = rng.integers(0, n - 1, size=max_exact_pairs)
        j = j + (j >= i)  # uniform over j != i
        c = _pair_cosines(unit, i, j)
        same = lab[i] == lab[j]
        same_sum, diff_sum = c[same].sum(), c[~same].sum()
        same_n, diff_n = int(same.sum()), int((~same).sum())
    if same_n == 0 or diff_n == 0:
        raise ValueError("need both same-class and different-class pairs")
    return float(same_sum / same_n), float(diff_sum / diff_n)


def class_pair_cosine_layers(embeddings, labels, seed: int = 0):
    """Apply :func:`class_pair_cosine` to each layer; returns list of (layer, same, diff)."""
    return [(l, *class_pair_cosine(h, labels, seed)) for l, h in enumerate(embeddings)]


def linear_cka(x, y) -> float:
    """Linear CKA ``|Yc^T Xc|_F^2 / (|Xc^T Xc|_F |Yc^T Yc|_F)`` on column-centered inputs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("CKA inputs need the same number of rows")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    xx = np.linalg.norm(xc.T @ xc)
    yy = np.linalg.norm(yc.T @ yc)
    if xx == 0.0 or yy == 0.0:
        raise ValueError("CKA undefined for zero-variance input")
    xy = np.linalg.norm(yc.T @ xc) ** 2
    return float(min(1.0, max(0.0, xy / (xx * yy))))


def linear_probe(
    embeddings, labels, masks, lr=0.1, iterations=1000, l2=1e-4, tol=1e-7
) -> float:
    """Test accuracy of a softmax-regression probe fit on train rows.

    Features are standardized with train-row statistics; constant columns
    become zero, so a constant embedding leaves only the bias to learn.
    Full-batch gradient descent stops early once the gradient max-norm
    drops below ``tol``.
    """
    x = np.asarray(embeddings, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    train_m = np.asarray(masks["train"], bool)
    test_m = np.asarray(masks["test"], bool)
    tr = np.flatnonzero(train_m)
    if len(np.unique(labels[tr])) < 2:
        raise ValueError("linear probe needs at least two classes in the training mask")
    mu = x[tr].mean(axis=0)
    sd = x[tr].std(axis=0)
    sd = np.where(sd > 1e-12, sd, np.inf)
    z = (x - mu) / sd
    k = int(labels.max()) + 1
    w = np.zeros((z.shape[1], k))
    b = np.zeros(k)
    onehot = np.eye(k)[labels[tr]]
    zt = z[tr]
    for _ in range(iterations):
        s = zt @ w + b
        s -= s.max(axis=1, keepdims=True)
        p = np.exp(s)
        p /= p.sum(axis=1, keepdims=True)
        d = (p - onehot) / len(tr)
        gw = zt.T @ d + l2 * w
        gb = d.sum(axis=0)
        if max(np.max(np.abs(gw)), np.max(np.abs(gb))) < tol:
            break
        w -= lr * gw
        b -= lr * gb
    te = np.flatnonzero(test_m)
    pred = np.argmax(z[te] @ w + b, axis=1)
    return float(np.mean(pred == labels[te]))


def edge_set_overlap(added: dict):
    """UpSet rows for every nonempty subset of strategies.

    ``added`` maps strategy name -> iterable of edges. Strategies are ordered
    by name; bit k of ``subset_mask`` marks the k-th. ``exclusive_size``
    counts edges in every member set and in no other; ``jaccard`` is
    |intersection| / |union| over the member sets.
    """
    names = sorted(added)
    sets = [frozenset(tuple(e) for e in added[k]) for k in names]
    union_all = frozenset().union(*sets) if sets else frozenset()
    membership = {}
    for e in union_all:
        membership[e] = sum(1 << k for k, s in enumerate(sets) if e in s)
    rows = []
    for r in range(1, len(names) + 1):
        for combo in itertools.combinations(range(len(names)), r):
            mask = sum(1 << k for k in combo)
            members = [sets[k] for k in combo]
            inter = frozenset.intersection(*members)
            uni = frozenset.union(*members)
            exclusive = sum(1 for m in membership.values() if m == mask)
            jac = len(inter) / len(uni) if uni else 0.0
            rows.append(
                {
                    "subset_mask": mask,
                    "strategies": [names[k] for k in combo],
                    "exclusive_size": exclusive,
                    "intersection_size": len(inter),
                    "jaccard": jac,
                }
            )
    return rows
