"""On-disk formats: edge lists, features, labels, masks, edit logs, and a Planetoid converter.

Edge list::

    # nodes=N directed=0|1
    u v
    ...

Features: header ``n d C`` then n rows of d reals. Labels: n integers.
Masks: n characters from ``t`` (train), ``v`` (val), ``e`` (test), ``-``.
"""
from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, from_edge_list

log = logging.getLogger(__name__)

_HEADER = re.compile(r"^#\s*nodes\s*=\s*(\d+)\s+directed\s*=\s*([01])\s*$")
MASK_CODES = {"t": "train", "v": "val", "e": "test"}


class FormatError(ValueError):
    pass


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_npz(path, **arrays) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.stem}.", suffix=".npz", dir=path.parent)
    os.close(fd)
    try:
        np.savez_compressed(tmp, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# edge lists


def parse_edge_list(text: str) -> Graph:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty edge list")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise FormatError(f"missing header '# nodes=N directed={{0|1}}', got {lines[0]!r}")
    n, directed = int(m.group(1)), m.group(2) == "1"
    pairs = []
    loops = 0
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"line {lineno}: node ids must be integers") from None
        if u == v:
            loops += 1
            continue
        pairs.append((u, v))
    if loops:
        log.warning("dropped %d self-loop(s) at ingestion", loops)
    try:
        return from_edge_list(pairs, n, directed)
    except GraphError as exc:
        raise FormatError(str(exc)) from exc


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def format_edge_list(g: Graph) -> str:
    out = [f"# nodes={g.n_nodes} directed={int(g.directed)}"]
    out += [f"{u} {v}" for u, v in g.sorted_edges]
    return "\n".join(out) + "\n"


def write_edge_list(g: Graph, path) -> None:
    atomic_write_text(path, format_edge_list(g))


# ---------------------------------------------------------------------------
# node data


def read_features(path):
    """Returns ``(features, n_classes)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise FormatError("feature header must be 'n d C'")
        n, d, c = (int(x) for x in header)
        x = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if x.shape != (n, d):
        raise FormatError(f"expected {n}x{d} features, found {x.shape[0]}x{x.shape[1]}")
    return x, c


def write_features(path, x, n_classes: int) -> None:
    x = np.asarray(x, dtype=float)
    rows = [" ".join(fmt_float(v) if v != int(v) else str(int(v)) for v in row) for row in x]
    atomic_write_text(path, f"{x.shape[0]} {x.shape[1]} {n_classes}\n" + "\n".join(rows) + "\n")


def read_labels(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=np.int64))


def write_labels(path, labels) -> None:
    atomic_write_text(path, "\n".join(str(int(v)) for v in labels) + "\n")


def parse_masks(text: str) -> dict:
    codes = "".join(text.split())
    bad = set(codes) - set("tve-")
    if bad:
        raise FormatError(f"unknown mask characters {sorted(bad)}")
    arr = np.array(list(codes))
    return {name: arr == code for code, name in MASK_CODES.items()}


def read_masks(path) -> dict:
    return parse_masks(Path(path).read_text(encoding="utf-8"))


def write_masks(path, masks: dict, n: int) -> None:
    chars = np.full(n, "-")
    for code, name in MASK_CODES.items():
        chars[np.asarray(masks[name], bool)] = code
    atomic_write_text(path, "".join(chars) + "\n")


@dataclass
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    masks: dict
    n_classes: int

    def validate(self):
        n = self.graph.n_nodes
        if self.features.shape[0] != n or len(self.labels) != n:
            raise FormatError("features/labels row count does not match the graph")
        for k, m in self.masks.items():
            if len(m) != n:
                raise FormatError(f"{k} mask has length {len(m)}, expected {n}")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise FormatError("labels outside [0, C)")
        return self


def load_dataset(edges, features, labels, masks) -> Dataset:
    g = read_edge_list(edges)
    x, c = read_features(features)
    return Dataset(g, x, read_labels(labels), read_masks(masks), c).validate()


def load_dataset_dir(root) -> Dataset:
    root = Path(root)
    return load_dataset(
        root / "edges.txt", root / "features.txt", root / "labels.txt", root / "masks.txt"
    )


def save_dataset_dir(ds: Dataset, root) -> None:
    root = Path(root)
    write_edge_list(ds.graph, root / "edges.txt")
    write_features(root / "features.txt", ds.features, ds.n_classes)
    write_labels(root / "labels.txt", ds.labels)
    write_masks(root / "masks.txt", ds.masks, ds.graph.n_nodes)


# ---------------------------------------------------------------------------
# edit logs


def write_edit_log(edits, path) -> None:
    atomic_write_text(path, json.dumps([e.to_dict() for e in edits], indent=1) + "\n")


def read_edit_log(path) -> list:
    from .rewiring import Edit

    return [Edit.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


# ---------------------------------------------------------------------------
# Planetoid raw files (ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index})


def convert_planetoid(raw_dir, name: str, directed: bool = False) -> Dataset:
    """Read the Planetoid pickles with the standard transductive split.

    Train = first ``len(y)`` nodes, val = the next 500, test = ``test.index``.
    Unpickling needs scipy for the sparse feature matrices. ``directed``
    keeps both arcs of every adjacency-list entry instead of symmetrizing.
    """
    import pickle

    raw_dir = Path(raw_dir)

    def load(part):
        with open(raw_dir / f"ind.{name}.{part}", "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (load(p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw_dir / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)

    def dense(m):
        return np.asarray(m.todense() if hasattr(m, "todense") else m, dtype=np.float64)

    allx, tx = dense(allx), dense(tx)
    ally, ty = np.asarray(ally), np.asarray(ty)
    if name.lower() == "citeseer":
        # isolated test nodes are missing from tx/ty; pad with zero rows
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = np.zeros((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min()] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min()] = ty
        tx, ty = tx_ext, ty_ext
    feats = np.vstack([allx, tx])
    onehot = np.vstack([ally, ty])
    feats[test_idx] = feats[test_sorted]
    onehot[test_idx] = onehot[test_sorted]
    labels = onehot.argmax(axis=1)
    n = feats.shape[0]
    pairs = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                pairs.add((int(u), int(v)))
                if directed:
                    pairs.add((int(v), int(u)))
    g = from_edge_list(sorted(pairs), n, directed)
    n_train = len(y)
    masks = {k: np.zeros(n, bool) for k in ("train", "val", "test")}
    masks["train"][:n_train] = True
    masks["val"][n_train : n_train + 500] = True
    masks["test"][test_idx] = True
    masks["val"] &= ~masks["test"]
    return Dataset(g, feats, labels.astype(np.int64), masks, onehot.shape[1]).validate()
