"""Sweep orchestration: rewire once per (strategy, budget), train at each depth, persist records.

Outputs live under ``<output_dir>/<fingerprint[:16]>/`` so identical configs
land in the same place::

    config.json         canonical config
    records.json        every RunRecord, in (strategy, budget) order
    records.csv         one row per (strategy, budget, depth)
    summary.csv         best "L / acc" cell per (model, pairnorm, strategy, dataset, budget)
    timings.json        wall times (kept apart so the files above are reproducible)
    runs/<tag>.json     one RunRecord
    edits/<tag>.json    edit log
    graphs/<tag>.txt    rewired edge list
    embeddings/<tag>.npz
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import hashlib
import io
import json
import logging
import multiprocessing
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .formats import (
    Dataset,
    atomic_write_npz,
    atomic_write_text,
    fmt_float,
    load_dataset,
    read_edit_log,
    write_edge_list,
    write_edit_log,
)
from .gnn import HYPERPARAMS, TrainConfig, train
from .rewiring import STRATEGIES, RewiringAborted, RewiringConfig, rewire

log = logging.getLogger(__name__)

TRAIN_KEYS = ("hidden_dim", "dropout", "lr", "weight_decay", "epochs")


class ConfigError(ValueError):
    pass


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    edges: str
    features: str
    labels: str
    masks: str
    dataset: str = "custom"
    model: str = "gcn"
    pairnorm: bool = False
    strategies: tuple = ("none",)
    budgets: tuple = (0.0,)
    depths: tuple = (2,)
    root_seed: int = 0
    output_dir: str = "runs"
    train: dict = field(default_factory=dict)  # overrides of TRAIN_KEYS

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        if self.model not in ("gcn", "dirgcn"):
            raise ConfigError(f"unknown model {self.model!r}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; expected a subset of {STRATEGIES}")
        if any(not 0.0 <= b <= 1.0 for b in self.budgets):
            raise ConfigError("budgets must lie in [0, 1]")
        if any(d < 1 for d in self.depths):
            raise ConfigError("depths must be >= 1")
        if not (self.strategies and self.budgets and self.depths):
            raise ConfigError("strategies, budgets and depths must be nonempty")
        unknown = set(self.train) - set(TRAIN_KEYS)
        if unknown:
            raise ConfigError(f"unknown training keys {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        d = dict(d)
        if base_dir is not None:
            for k in ("edges", "features", "labels", "masks", "output_dir"):
                if k in d and not os.path.isabs(d[k]):
                    d[k] = str(Path(base_dir) / d[k])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def train_config(self, depth: int, seed: int) -> TrainConfig:
        base = HYPERPARAMS.get(self.dataset.lower(), {})
        return TrainConfig(
            model=self.model, depth=depth, pairnorm=self.pairnorm, seed=seed,
            **{**base, **self.train},
        )

    def canonical(self) -> dict:
        """Content identity: input file hashes replace paths; output_dir is excluded."""
        d = asdict(self)
        for k in ("edges", "features", "labels", "masks"):
            d[k] = _sha256_file(d[k])
        d.pop("output_dir")
        d["strategies"] = list(self.strategies)
        d["budgets"] = list(self.budgets)
        d["depths"] = list(self.depths)
        d["train"] = dict(sorted(self.train.items()))
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def run_dir(self, fingerprint: Optional[str] = None) -> Path:
        return Path(self.output_dir) / (fingerprint or self.fingerprint())[:16]

    def load_dataset(self) -> Dataset:
        return load_dataset(self.edges, self.features, self.labels, self.masks)


def run_seed(root_seed: int, strategy: str, budget: float, depth: int) -> int:
    """Order-independent per-run seed."""
    key = f"{int(root_seed)}|{strategy}|{float(budget)!r}|{int(depth)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def run_tag(strategy: str, budget: float) -> str:
    return f"{strategy}__r{float(budget)!r}"


@dataclass
class RunRecord:
    fingerprint: str
    dataset: str
    model: str
    pairnorm: bool
    strategy: str
    budget: float
    budget_edges: int
    added: int
    removed: int
    depth_accuracies: dict  # str(depth) -> test accuracy, None if that depth failed
    best_layer: Optional[int]
    max_accuracy: Optional[float]
    seeds: dict
    status: str = "ok"
    errors: list = field(default_factory=list)
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def best_depth(depth_accuracies: dict):
    """``(depth, acc)`` with max accuracy; ties go to the smaller depth."""
    valid = [(int(k), v) for k, v in depth_accuracies.items() if v is not None]
    if not valid:
        return None, None
    return min(valid, key=lambda kv: (-kv[1], kv[0]))


def _run_job(cfg: ExperimentConfig, fingerprint: str, strategy: str, budget: float) -> RunRecord:
    t0 = time.perf_counter()
    out = cfg.run_dir(fingerprint)
    tag = run_tag(strategy, budget)
    ds = cfg.load_dataset()
    rc = RewiringConfig(strategy, budget)
    rec = RunRecord(
        fingerprint, cfg.dataset, cfg.model, cfg.pairnorm, strategy, budget,
        rc.budget(ds.graph.n_edges), 0, 0, {}, None, None,
        {str(d): run_seed(cfg.root_seed, strategy, budget, d) for d in cfg.depths},
    )
    try:
        state = rewire(ds.graph, rc)
    except RewiringAborted as exc:
        write_edit_log(exc.state.edits, out / "edits" / f"{tag}.json")
        rec.status = "failed"
        rec.errors.append(f"rewiring: {exc}")
        rec.added, rec.removed = exc.state.added_count, exc.state.removed_count
        rec.wall_time = time.perf_counter() - t0
        return rec
    rec.added, rec.removed = state.added_count, state.removed_count
    write_edit_log(state.edits, out / "edits" / f"{tag}.json")
    write_edge_list(state.graph, out / "graphs" / f"{tag}.txt")

    arrays = {"labels": ds.labels}
    for k, m in ds.masks.items():
        arrays[f"mask_{k}"] = m
    for depth in cfg.depths:
        tc = cfg.train_config(depth, rec.seeds[str(depth)])
        try:
            report = train(state.graph, ds.features, ds.labels, ds.masks, tc)
        except (ArithmeticError, ValueError) as exc:
            log.error("%s depth %d failed: %s", tag, depth, exc)
            rec.depth_accuracies[str(depth)] = None
            rec.status = "failed"
            rec.errors.append(f"depth {depth}: {exc}")
            continue
        rec.depth_accuracies[str(depth)] = report.test_accuracy_at_best
        # layer 0 is the raw feature matrix; skip it to keep archives small
        for layer, h in enumerate(report.embeddings[1:], start=1):
            arrays[f"depth{depth}_layer{layer}"] = h.astype(np.float32)
    rec.best_layer, rec.max_accuracy = best_depth(rec.depth_accuracies)
    atomic_write_npz(out / "embeddings" / f"{tag}.npz", **arrays)
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_job_safe(cfg, fingerprint, strategy, budget) -> RunRecord:
    try:
        return _run_job(cfg, fingerprint, strategy, budget)
    except Exception as exc:  # a failed run must not stop the sweep
        log.exception("run %s failed", run_tag(strategy, budget))
        return RunRecord(
            fingerprint, cfg.dataset, cfg.model, cfg.pairnorm, strategy, budget, 0, 0, 0,
            {}, None, None, {}, "failed", [f"{type(exc).__name__}: {exc}"],
        )


def worker_count(n_jobs: int) -> int:
    env = os.environ.get("ERR_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "model", "pairnorm", "strategy", "budget", "added", "removed",
                "depth", "test_accuracy", "status"])
    for r in records:
        for depth in sorted(r.depth_accuracies, key=int):
            acc = r.depth_accuracies[depth]
            w.writerow([r.dataset, r.model, int(r.pairnorm), r.strategy, fmt_float(r.budget),
                        r.added, r.removed, depth, "" if acc is None else fmt_float(acc),
                        r.status])
    return buf.getvalue()


def run_pipeline(cfg: ExperimentConfig) -> list:
    """Run every (strategy, budget) job and write all outputs; returns the records."""
    cfg.load_dataset()  # fail fast on parse errors
    fp = cfg.fingerprint()
    out = cfg.run_dir(fp)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.json", json.dumps(cfg.canonical(), indent=1, sort_keys=True) + "\n")
    jobs = [(s, b) for s in cfg.strategies for b in cfg.budgets]
    workers = worker_count(len(jobs))
    log.info("sweep %s: %d jobs on %d workers", fp[:16], len(jobs), workers)
    if workers == 1:
        records = [_run_job_safe(cfg, fp, s, b) for s, b in jobs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with cf.ProcessPoolExecutor(workers, mp_context=ctx) as pool:
            futs = [pool.submit(_run_job_safe, cfg, fp, s, b) for s, b in jobs]
            records = [f.result() for f in futs]  # job order, not completion order
    for r in records:
        atomic_write_text(out / "runs" / f"{run_tag(r.strategy, r.budget)}.json", r.to_json())
    atomic_write_text(
        out / "records.json",
        json.dumps([r.to_dict() for r in records], indent=1, sort_keys=True) + "\n",
    )
    atomic_write_text(out / "records.csv", records_csv(records))
    atomic_write_text(out / "summary.csv", summary_csv(summarize(records)))
    atomic_write_text(
        out / "timings.json",
        json.dumps({run_tag(r.strategy, r.budget): r.wall_time for r in records}, indent=1) + "\n",
    )
    return records


def load_records(path) -> list:
    path = Path(path)
    if path.is_dir():
        path = path / "records.json"
    return [RunRecord.from_dict(d) for d in json.loads(path.read_text(encoding="utf-8"))]


# ---------------------------------------------------------------------------
# summaries


def format_cell(depth: int, acc: float) -> str:
    return f"{depth} / {100.0 * acc:.1f}"


def summarize(records) -> list:
    """Rows ``{model, pairnorm, strategy, dataset, budget, best_layer, accuracy, cell}``.

    Records are merged per key (so split sweeps combine); records without any
    successful depth are omitted.
    """
    if not records:
        raise ValueError("summarize needs at least one record")
    merged = {}
    for r in records:
        key = (r.model, bool(r.pairnorm), r.strategy, r.dataset, float(r.budget))
        merged.setdefault(key, {}).update(
            {k: v for k, v in r.depth_accuracies.items() if v is not None}
        )
    rows = []
    for key in sorted(merged):
        depth, acc = best_depth(merged[key])
        if depth is None:
            continue
        model, pn, strategy, dataset, budget = key
        rows.append(dict(model=model, pairnorm=pn, strategy=strategy, dataset=dataset,
                         budget=budget, best_layer=depth, accuracy=acc,
                         cell=format_cell(depth, acc)))
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "pairnorm", "strategy", "dataset", "budget", "cell"])
    for r in rows:
        w.writerow([r["model"], int(r["pairnorm"]), r["strategy"], r["dataset"],
                    fmt_float(r["budget"]), r["cell"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# diagnostics over a finished sweep


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def diagnose_run(run_dir, out_dir=None, outer_depth: Optional[int] = None, seed: int = 0) -> dict:
    """Write cosine, probe, CKA and UpSet CSVs for a sweep directory; returns their paths."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    records = [r for r in load_records(run_dir) if r.status == "ok"]
    if not records:
        raise ValueError(f"no successful runs under {run_dir}")
    archives = {}
    for r in records:
        with np.load(run_dir / "embeddings" / f"{run_tag(r.strategy, r.budget)}.npz") as z:
            archives[(r.strategy, r.budget)] = {k: z[k] for k in z.files}

    def layers(arch, depth):
        return [arch[f"depth{depth}_layer{l}"] for l in range(1, depth + 1)
                if f"depth{depth}_layer{l}" in arch]

    cos_rows, probe_rows = [], []
    for (strategy, budget), arch in sorted(archives.items()):
        labels = arch["labels"]
        masks = {k: arch[f"mask_{k}"] for k in ("train", "val", "test")}
        depths = sorted({int(k.split("_")[0][5:]) for k in arch if k.startswith("depth")})
        if not depths:
            continue
        outer = outer_depth if outer_depth in depths else max(depths)
        for layer, h in enumerate(layers(arch, outer), start=1):
            same, diff = dg.class_pair_cosine(h.astype(float), labels, seed)
            cos_rows.append((strategy, budget, outer, layer, same, diff))
        for depth in depths:
            for layer, h in enumerate(layers(arch, depth)[:-1], start=1):
                acc = dg.linear_probe(h.astype(float), labels, masks)
                probe_rows.append((strategy, budget, depth, layer, acc))

    cka_rows = []
    keys = sorted(archives)
    for a_i, a in enumerate(keys):
        for b in keys[a_i + 1:]:
            if a[1] != b[1]:
                continue
            common = sorted(
                {k for k in archives[a] if k.startswith("depth")}
                & {k for k in archives[b] if k.startswith("depth")}
            )
            for depth in sorted({int(k.split("_")[0][5:]) for k in common}):
                k = f"depth{depth}_layer{depth}"
                if k in common:
                    v = dg.linear_cka(archives[a][k].astype(float), archives[b][k].astype(float))
                    cka_rows.append((a[0], b[0], a[1], depth, v))

    upset_rows = []
    for budget in sorted({r.budget for r in records}):
        added = {}
        for r in records:
            if r.budget == budget and r.added > 0:
                edits = read_edit_log(run_dir / "edits" / f"{run_tag(r.strategy, budget)}.json")
                added[r.strategy] = [e for ed in edits if ed.action in ("add", "add_pair")
                                     for e in ed.edges]
        for row in dg.edge_set_overlap(added) if added else []:
            upset_rows.append((budget, row["subset_mask"], "+".join(row["strategies"]),
                               row["exclusive_size"], row["intersection_size"], row["jaccard"]))

    paths = {
        "cosine": out_dir / "cosine_curves.csv",
        "probe": out_dir / "probe_grid.csv",
        "cka": out_dir / "cka.csv",
        "upset": out_dir / "upset.csv",
    }
    atomic_write_text(paths["cosine"], _csv(
        ["strategy", "budget", "depth", "layer", "cos_same_class", "cos_diff_class"], cos_rows))
    atomic_write_text(paths["probe"], _csv(
        ["strategy", "budget", "depth", "readout_layer", "test_accuracy"], probe_rows))
    atomic_write_text(paths["cka"], _csv(
        ["strategy_a", "strategy_b", "budget", "depth", "cka"], cka_rows))
    atomic_write_text(paths["upset"], _csv(
        ["budget", "subset_mask", "strategies", "exclusive_size", "intersection_size", "jaccard"],
        upset_rows))
    return paths
