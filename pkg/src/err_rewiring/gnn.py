"""GCN and DirGCN in plain numpy: forward, explicit backward, Adam, training loop.

Layer update (hidden layers)::

    GCN     H' = relu(PN(A_hat  Drop(H) W))
    DirGCN  H' = relu(PN(A_in Drop(H) W_in + A_out Drop(H) W_out + Drop(H) W_self))

``PN`` is PairNorm when enabled. The last layer skips PN and relu and
returns logits. There are no bias terms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .graph import Graph, symmetrize

log = logging.getLogger(__name__)

PAIRNORM_EPS = 1e-12

# hidden dim, dropout, lr, weight decay
HYPERPARAMS = {
    "cora": dict(hidden_dim=16, dropout=0.5, lr=0.01, weight_decay=5e-3),
    "citeseer": dict(hidden_dim=16, dropout=0.5, lr=0.01, weight_decay=5e-3),
    "cornell": dict(hidden_dim=64, dropout=0.5, lr=0.01, weight_decay=5e-4),
    "texas": dict(hidden_dim=64, dropout=0.5, lr=0.01, weight_decay=5e-4),
}


class TrainingError(ArithmeticError):
    def __init__(self, msg, epoch=None):
        super().__init__(msg if epoch is None else f"epoch {epoch}: {msg}")
        self.epoch = epoch


class CollapseError(ArithmeticError):
    """PairNorm input is constant across nodes."""


@dataclass(frozen=True)
class TrainConfig:
    model: str = "gcn"  # gcn | dirgcn
    depth: int = 2
    hidden_dim: int = 16
    dropout: float = 0.5
    lr: float = 0.01
    weight_decay: float = 5e-3
    epochs: int = 200
    pairnorm: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("gcn", "dirgcn"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @classmethod
    def for_dataset(cls, name: str, **overrides) -> "TrainConfig":
        return cls(**{**HYPERPARAMS[name.lower()], **overrides})


@dataclass
class PropagationOperators:
    gcn_norm: Optional[np.ndarray]
    dir_in: np.ndarray
    dir_out: np.ndarray


def _row_normalize(a: np.ndarray) -> np.ndarray:
    deg = a.sum(axis=1)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return a * inv[:, None]


def build_operators(g: Graph) -> PropagationOperators:
    """``D~^-1/2 (A+I) D~^-1/2`` (undirected only) and ``D_in^-1 A_in``, ``D_out^-1 A_out``.

    Node v aggregates over in-neighbors u (u -> v) in ``dir_in`` and over
    out-neighbors in ``dir_out``. Zero-degree rows stay zero.
    """
    a = g.adjacency_matrix()
    gcn = None
    if not g.directed:
        at = a + np.eye(g.n_nodes)
        d = 1.0 / np.sqrt(at.sum(axis=1))
        gcn = d[:, None] * at * d[None, :]
    return PropagationOperators(gcn, _row_normalize(a.T), _row_normalize(a))


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ModelParams:
    model: str
    depth: int
    hidden_dim: int
    layers: list  # per layer: dict name -> weight matrix
    pairnorm_enabled: bool = False
    adam_m: list = field(default_factory=list)
    adam_v: list = field(default_factory=list)
    adam_step: int = 0

    def arrays(self) -> list:
        return [layer[k] for layer in self.layers for k in sorted(layer)]

    def copy(self) -> "ModelParams":
        return replace(
            self,
            layers=[{k: w.copy() for k, w in layer.items()} for layer in self.layers],
            adam_m=[m.copy() for m in self.adam_m],
            adam_v=[v.copy() for v in self.adam_v],
        )


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(
    model: str, in_dim: int, hidden_dim: int, n_classes: int, depth: int, rng, pairnorm=False
) -> ModelParams:
    dims = [in_dim] + [hidden_dim] * (depth - 1) + [n_classes]
    names = ("w",) if model == "gcn" else ("in", "out", "self")
    layers = [
        {k: _glorot(rng, dims[l], dims[l + 1]) for k in names} for l in range(depth)
    ]
    params = ModelParams(model, depth, hidden_dim, layers, pairnorm)
    params.adam_m = [np.zeros_like(w) for w in params.arrays()]
    params.adam_v = [np.zeros_like(w) for w in params.arrays()]
    return params


# ---------------------------------------------------------------------------
# PairNorm


def pairnorm(h: np.ndarray) -> np.ndarray:
    """Center rows, then scale so the mean squared pairwise row distance is 1.

    Uses ``sum_ij |h_i - h_j|^2 = 2 n sum_i |h_i - mean|^2``.
    """
    return _pairnorm_forward(h)[0]


def _pairnorm_forward(h):
    n = h.shape[0]
    if n < 2:
        raise ValueError("PairNorm needs at least two nodes")
    c = h - h.mean(axis=0, keepdims=True)
    s = np.sqrt(2.0 * np.sum(c * c) / n)
    if s < PAIRNORM_EPS:
        raise CollapseError("PairNorm input is constant across nodes (total collapse)")
    return c / s, (c, s)


def _pairnorm_backward(grad, cache):
    c, s = cache
    n = c.shape[0]
    dc = grad / s - (np.sum(grad * c) * 2.0 / (n * s**3)) * c
    return dc - dc.mean(axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# forward / backward


def _layer_linear(ops, layer, hd, model):
    if model == "gcn":
        return ops.gcn_norm @ (hd @ layer["w"])
    return ops.dir_in @ (hd @ layer["in"]) + ops.dir_out @ (hd @ layer["out"]) + hd @ layer["self"]


def _forward(ops, params: ModelParams, x, training, rng, dropout):
    if params.model == "gcn" and ops.gcn_norm is None:
        raise ValueError("GCN needs an undirected graph; symmetrize first")
    h = x
    embeddings = [x]
    caches = []
    for l, layer in enumerate(params.layers):
        if h.shape[1] != next(iter(layer.values())).shape[0]:
            raise ValueError(
                f"layer {l}: input width {h.shape[1]} != weight rows "
                f"{next(iter(layer.values())).shape[0]}"
            )
        mask = None
        hd = h
        if training and dropout > 0.0:
            mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            hd = h * mask
        z = _layer_linear(ops, layer, hd, params.model)
        pn = None
        if l < params.depth - 1:
            if params.pairnorm_enabled:
                z, pn = _pairnorm_forward(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
        caches.append((hd, mask, z, pn))
        embeddings.append(h)
    return h, embeddings, caches


def gcn_forward(ops, params, x, training=False, rng=None, dropout=0.0):
    """Returns ``(logits, [H0=X, H1, ..., logits])``."""
    if params.model != "gcn":
        raise ValueError("params are not GCN params")
    logits, emb, _ = _forward(ops, params, x, training, rng, dropout)
    return logits, emb


def dirgcn_forward(ops, params, x, training=False, rng=None, dropout=0.0):
    if params.model != "dirgcn":
        raise ValueError("params are not DirGCN params")
    logits, emb, _ = _forward(ops, params, x, training, rng, dropout)
    return logits, emb


def _backward(ops, params: ModelParams, caches, dlogits):
    grads = [None] * params.depth
    g = dlogits
    for l in reversed(range(params.depth)):
        hd, mask, z, pn = caches[l]
        layer = params.layers[l]
        if l < params.depth - 1:
            g = g * (z > 0.0)
            if pn is not None:
                g = _pairnorm_backward(g, pn)
        if params.model == "gcn":
            ag = ops.gcn_norm.T @ g
            grads[l] = {"w": hd.T @ ag}
            dh = ag @ layer["w"].T
        else:
            gin = ops.dir_in.T @ g
            gout = ops.dir_out.T @ g
            grads[l] = {"in": hd.T @ gin, "out": hd.T @ gout, "self": hd.T @ g}
            dh = gin @ layer["in"].T + gout @ layer["out"].T + g @ layer["self"].T
        if mask is not None:
            dh = dh * mask
        g = dh
    return grads


def cross_entropy(logits, labels, idx):
    """Mean softmax cross-entropy over rows ``idx`` and its gradient wrt logits."""
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = labels[idx]
    loss = -float(np.mean(logp[np.arange(len(idx)), y]))
    p = np.exp(logp)
    p[np.arange(len(idx)), y] -= 1.0
    grad = np.zeros_like(logits)
    grad[idx] = p / len(idx)
    return loss, grad


def objective_and_grads(ops, params, x, labels, idx, weight_decay, training=False, rng=None, dropout=0.0):
    """Loss ``CE + (wd/2) sum |W|^2`` and matching gradients (list aligned with ``arrays()``)."""
    logits, _, caches = _forward(ops, params, x, training, rng, dropout)
    loss, dlogits = cross_entropy(logits, labels, idx)
    grads = _backward(ops, params, caches, dlogits)
    flat = []
    for layer, gl in zip(params.layers, grads):
        for k in sorted(layer):
            flat.append(gl[k] + weight_decay * layer[k])
    reg = 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in params.arrays())
    return loss + reg, loss, flat


def objective_value(ops, params, x, labels, idx, weight_decay):
    """Loss only, kept in the dtype of ``params``/``x`` (no float() narrowing)."""
    logits = _forward(ops, params, x, False, None, 0.0)[0]
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    ce = -np.mean(logp[np.arange(len(idx)), labels[idx]])
    return ce + 0.5 * weight_decay * sum(np.sum(w * w) for w in params.arrays())


def adam_step(params: ModelParams, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    params.adam_step += 1
    t = params.adam_step
    for w, g, m, v in zip(params.arrays(), grads, params.adam_m, params.adam_v):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        w -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainReport:
    train_loss: list
    val_accuracy: list
    best_epoch: int
    val_accuracy_at_best: float
    test_accuracy_at_best: float
    embeddings: list  # eval-mode [X, H1, ..., logits] at the best epoch

    @property
    def penultimate(self) -> np.ndarray:
        return self.embeddings[-2]


def accuracy(logits, labels, mask) -> float:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


def _rngs(seed):
    init_ss, drop_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(drop_ss)


def train(g: Graph, features, labels, masks: dict, config: TrainConfig) -> TrainReport:
    """Full-batch training; keeps the first epoch with the best validation accuracy.

    ``masks`` maps ``"train"``, ``"val"``, ``"test"`` to boolean arrays.
    GCN runs on the symmetrized graph when given a directed one.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train_m, val_m, test_m = (np.asarray(masks[k], bool) for k in ("train", "val", "test"))
    if np.any(train_m & val_m) or np.any(train_m & test_m) or np.any(val_m & test_m):
        raise ValueError("train/val/test masks must be disjoint")
    n_classes = int(labels.max()) + 1
    if labels.min() < 0:
        raise ValueError("labels must be nonnegative")
    if config.model == "gcn" and g.directed:
        g = symmetrize(g)
    ops = build_operators(g)
    init_rng, drop_rng = _rngs(config.seed)
    params = init_params(
        config.model, x.shape[1], config.hidden_dim, n_classes, config.depth, init_rng,
        config.pairnorm,
    )
    idx = np.flatnonzero(train_m)
    losses, vals = [], []
    best = (-1.0, -1, float("nan"), None)
    for epoch in range(config.epochs):
        try:
            _, loss, grads = objective_and_grads(
                ops, params, x, labels, idx, config.weight_decay, True, drop_rng, config.dropout
            )
        except CollapseError as exc:
            raise TrainingError(str(exc), epoch) from exc
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss", epoch)
        adam_step(params, grads, config.lr)
        logits, emb, _ = _forward(ops, params, x, False, None, 0.0)
        va = accuracy(logits, labels, val_m)
        losses.append(loss)
        vals.append(va)
        if va > best[0]:
            best = (va, epoch, accuracy(logits, labels, test_m), [e.copy() for e in emb])
    va, epoch, te, emb = best
    return TrainReport(losses, vals, epoch, va, te, emb or [])


def gradient_check(
    model="gcn", depth=2, pairnorm=False, n=7, in_dim=4, hidden=5, n_classes=3,
    weight_decay=5e-3, step=1e-5, seed=0, g: Optional[Graph] = None,
):
    """Max entrywise relative error between analytic and central-difference gradients.

    The denominator is ``max(|a|, |fd|, 1e-6 * max|a|)`` so entries whose true
    gradient is zero do not divide by rounding noise. The difference quotients
    are evaluated in ``np.longdouble`` where the platform has it, which keeps
    their rounding error well below the tolerance for tiny gradient entries.
    """
    rng = np.random.default_rng(seed)
    if g is None:
        from .graph import from_edge_list

        pairs = [(i, (i + 1) % n) for i in range(n)]
        pairs += [tuple(rng.choice(n, 2, replace=False)) for _ in range(n)]
        g = from_edge_list(pairs, n, directed=(model == "dirgcn"))
    ops = build_operators(g)
    x = rng.normal(size=(g.n_nodes, in_dim))
    labels = rng.integers(0, n_classes, size=g.n_nodes)
    idx = np.arange(g.n_nodes)
    params = init_params(model, in_dim, hidden, n_classes, depth, rng, pairnorm)
    _, _, grads = objective_and_grads(ops, params, x, labels, idx, weight_decay)
    scale = max(float(np.max(np.abs(gr))) for gr in grads)
    hp = params.copy()
    hp.layers = [{k: w.astype(np.longdouble) for k, w in layer.items()} for layer in hp.layers]
    xh = x.astype(np.longdouble)
    worst = 0.0
    for w, gr in zip(hp.arrays(), grads):
        for pos in np.ndindex(w.shape):
            old = w[pos]
            w[pos] = old + step
            fp = objective_value(ops, hp, xh, labels, idx, weight_decay)
            w[pos] = old - step
            fm = objective_value(ops, hp, xh, labels, idx, weight_decay)
            w[pos] = old
            fd = float((fp - fm) / (2 * step))
            denom = max(abs(gr[pos]), abs(fd), 1e-6 * scale)
            worst = max(worst, abs(gr[pos] - fd) / denom)
    return worst
