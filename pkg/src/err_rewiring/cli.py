"""Command-line entry point: ``err <command> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from . import __version__
from .curvature import curvature_all_edges
from .experiment import ExperimentConfig, diagnose_run, load_records, run_pipeline, summarize, summary_csv
from .formats import (
    atomic_write_npz,
    atomic_write_text,
    convert_planetoid,
    fmt_float,
    load_dataset,
    read_edge_list,
    save_dataset_dir,
    write_edge_list,
    write_edit_log,
)
from .gnn import HYPERPARAMS, TrainConfig, train
from .graph import all_pairs_distances
from .resistance import effective_resistance
from .rewiring import STRATEGIES, RewiringAborted, RewiringConfig, rewire
from .synthetic import planted_partition

log = logging.getLogger("err_rewiring")


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


def cmd_rewire(args) -> int:
    g = read_edge_list(args.input)
    try:
        state = rewire(g, RewiringConfig(args.strategy, args.budget))
    except RewiringAborted as exc:
        if args.log:
            write_edit_log(exc.state.edits, args.log)
        log.error("rewiring aborted: %s", exc)
        return 1
    write_edge_list(state.graph, args.output)
    if args.log:
        write_edit_log(state.edits, args.log)
    print(f"budget={state.budget} added={state.added_count} removed={state.removed_count}")
    return 0


def cmd_resistance(args) -> int:
    g = read_edge_list(args.input)
    rep = effective_resistance(g, per_component=True)
    dist = all_pairs_distances(g)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "R", "R_hop", "d"])
    for i, j, r in rep.pairs(ordered=g.directed):
        d = int(dist[i, j])
        w.writerow([i, j, fmt_float(r), fmt_float(r / d) if d > 0 else "", d if d >= 0 else ""])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_curvature(args) -> int:
    g = read_edge_list(args.input)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v", "kappa"])
    for (u, v), k in curvature_all_edges(g).sorted_items():
        w.writerow([u, v, fmt_float(k)])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.edges, args.features, args.labels, args.masks)
    overrides = {k: getattr(args, k) for k in ("hidden_dim", "dropout", "lr", "weight_decay", "epochs")
                 if getattr(args, k) is not None}
    base = HYPERPARAMS.get((args.dataset or "").lower(), {})
    tc = TrainConfig(model=args.model, depth=args.depth, pairnorm=args.pairnorm, seed=args.seed,
                     **{**base, **overrides})
    rep = train(ds.graph, ds.features, ds.labels, ds.masks, tc)
    out = {
        "config": tc.__dict__,
        "best_epoch": rep.best_epoch,
        "val_accuracy": rep.val_accuracy_at_best,
        "test_accuracy": rep.test_accuracy_at_best,
    }
    _emit(json.dumps(out, indent=1, sort_keys=True) + "\n", args.output)
    if args.embeddings:
        atomic_write_npz(args.embeddings, **{f"layer{l}": h for l, h in enumerate(rep.embeddings)})
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.output_dir:
        cfg = ExperimentConfig(**{**cfg.__dict__, "output_dir": args.output_dir})
    records = run_pipeline(cfg)
    failed = [r for r in records if r.status != "ok"]
    print(f"{cfg.run_dir()}: {len(records) - len(failed)} ok, {len(failed)} failed")
    return 1 if failed else 0


def cmd_summarize(args) -> int:
    records = []
    for path in args.records:
        records.extend(load_records(path))
    _emit(summary_csv(summarize(records)), args.output)
    return 0


def cmd_diagnose(args) -> int:
    paths = diagnose_run(args.run_dir, args.out, args.outer_depth, args.seed)
    for k, p in paths.items():
        print(f"{k}: {p}")
    return 0


def cmd_convert(args) -> int:
    ds = convert_planetoid(args.raw, args.name, directed=args.directed)
    save_dataset_dir(ds, args.out)
    print(f"{args.name}: {ds.graph.n_nodes} nodes, {ds.graph.n_edges} edges, {ds.n_classes} classes")
    return 0


def cmd_synth(args) -> int:
    ds = planted_partition(args.nodes, args.classes, args.features, args.p_in, args.p_out,
                           args.directed, seed=args.seed)
    save_dataset_dir(ds, args.out)
    print(f"{ds.graph.n_nodes} nodes, {ds.graph.n_edges} edges -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="err", description="Effective-resistance graph rewiring toolkit")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rewire", help="rewire an edge list")
    s.add_argument("--strategy", choices=STRATEGIES, default="resistance_add_remove")
    s.add_argument("--budget", type=float, required=True, help="fraction r of the initial edge count")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--log", help="edit log JSON")
    s.set_defaults(func=cmd_rewire)

    s = sub.add_parser("resistance", help="all-pairs effective resistance CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--output", default="-")
    s.set_defaults(func=cmd_resistance)

    s = sub.add_parser("curvature", help="Ollivier-Ricci curvature per edge CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--output", default="-")
    s.set_defaults(func=cmd_curvature)

    s = sub.add_parser("train", help="train one model")
    for k in ("edges", "features", "labels", "masks"):
        s.add_argument(f"--{k}", required=True)
    s.add_argument("--dataset", help="name used to pick default hyperparameters")
    s.add_argument("--model", choices=("gcn", "dirgcn"), default="gcn")
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--pairnorm", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    s.add_argument("--dropout", type=float)
    s.add_argument("--lr", type=float)
    s.add_argument("--weight-decay", dest="weight_decay", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--output", default="-")
    s.add_argument("--embeddings", help="write per-layer embeddings to this .npz")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run a configured sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("summarize", help="best layer / accuracy table from records")
    s.add_argument("records", nargs="+", help="records.json files or sweep directories")
    s.add_argument("--output", default="-")
    s.set_defaults(func=cmd_summarize)

    s = sub.add_parser("diagnose", help="cosine, probe, CKA and UpSet CSVs for a sweep directory")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--out")
    s.add_argument("--outer-depth", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("convert", help="convert Planetoid raw files to the native formats")
    s.add_argument("--raw", required=True, help="directory with ind.<name>.* files")
    s.add_argument("--name", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--directed", action="store_true")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("synth", help="write a planted-partition dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--nodes", type=int, default=100)
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--features", type=int, default=16)
    s.add_argument("--p-in", dest="p_in", type=float, default=0.1)
    s.add_argument("--p-out", dest="p_out", type=float, default=0.01)
    s.add_argument("--directed", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, ArithmeticError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
