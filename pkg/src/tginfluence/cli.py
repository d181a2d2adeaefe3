"""Command-line entry points for the experiment pipeline."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .bench import BenchTemplate, kernel_benchmark, loglog_slope, scaling_benchmark
from .pipeline import ExperimentRunner, load_config
from .sir import active_backend
from .synthetic import generate_synthetic, write_edge_file

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
log = logging.getLogger("tginfluence")


def _add_config_args(parser):
    parser.add_argument("-c", "--config", required=True,
                        help="path to the YAML experiment config")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted config override, e.g. sir.runs=50")
    parser.add_argument("-o", "--output", default=None,
                        help="output directory (default: config output_dir "
                             "under TGINFLUENCE_OUTPUT_ROOT)")


def _runner(args) -> ExperimentRunner:
    cfg = load_config(args.config, args.overrides)
    return ExperimentRunner(cfg, output_dir=args.output)


def cmd_ingest(args):
    stats = _runner(args).ingest()
    print(json.dumps(stats, indent=2, sort_keys=True))
    for warning in stats["warnings"]:
        log.warning("ingest: %s", warning)


def cmd_snapshot(args):
    runner = _runner(args)
    snaps = runner.snapshots()
    total = sum(s.total_weight for s in snaps)
    print(json.dumps({"snapshots": len(snaps), "total_weight": total,
                      "nodes": snaps[0].n_nodes}, indent=2))


def cmd_labels(args):
    runner = _runner(args)
    cfg = runner.cfg
    targets = [(cfg.protocol.train_label_t, cfg.sir.beta_train)]
    targets += [(cfg.protocol.test_label_t, b) for b in cfg.sir.beta_eval]
    for label_t, beta in targets:
        labels = runner.labels(label_t, beta)
        values = [lab.value for lab in labels.values()]
        log.info("labels t=%d beta=%s: mean %.4f max %.4f",
                 label_t, beta, sum(values) / len(values), max(values))


def cmd_train(args):
    runner = _runner(args)
    runner.train_model()
    log.info("trained with s=%s; checkpoint at %s",
             runner._selected_s, runner.out / "model" / "checkpoint.npz")


def cmd_rank(args):
    runner = _runner(args)
    scores = runner.rank()
    for (method, beta), vec in scores.items():
        tag = f" beta={beta}" if beta is not None else ""
        log.info("ranked %s%s -> %d nodes", method, tag, len(vec.scores))


def cmd_evaluate(args):
    runner = _runner(args)
    reports = runner.evaluate()
    for rep in reports:
        print(f"{rep.method:>6} beta={rep.beta}: tau={rep.tau:.4f} "
              + " ".join(f"hr@{f:g}={v:.3f}" for f, v in sorted(rep.hit_rates.items())))


def cmd_run(args):
    runner = _runner(args)
    reports = runner.run()
    for rep in reports:
        print(f"{rep.method:>6} beta={rep.beta}: tau={rep.tau:.4f} "
              + " ".join(f"hr@{f:g}={v:.3f}" for f, v in sorted(rep.hit_rates.items())))
    log.info("artifacts in %s", runner.out)


def cmd_bench(args):
    if args.mode == "kernels":
        rows = kernel_benchmark(n=args.nodes or 500, runs=args.runs)
    else:
        sizes = [int(x) for x in args.sizes.split(",")]
        overrides = {}
        if args.iterations:
            overrides["iterations"] = args.iterations
        template = BenchTemplate(**overrides)
        rows = scaling_benchmark(sizes, template)
        log.info("log-log slope of seconds vs nodes: %.3f", loglog_slope(rows))
    writer = csv.DictWriter(sys.stdout if args.out is None
                            else open(args.out, "w", newline=""),
                            fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def cmd_synth(args):
    edges = generate_synthetic(args.nodes, args.snapshots, args.mean_degree,
                               args.seed, activity_sigma=args.activity_sigma)
    write_edge_file(args.out, edges)
    log.info("wrote %d contacts over %d nodes to %s",
             edges.n_contacts, edges.n_nodes, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tginfluence",
        description="Predict future spreading influence of nodes in "
                    "discrete-time temporal networks "
                    f"(SIR kernel backend: {active_backend()})")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in [
        ("ingest", cmd_ingest, "parse the dataset and report statistics"),
        ("snapshot", cmd_snapshot, "build weighted snapshots"),
        ("labels", cmd_labels, "generate SIR influence labels"),
        ("train", cmd_train, "train the snapshot-CNN + LSTM model"),
        ("rank", cmd_rank, "score nodes with all configured methods"),
        ("evaluate", cmd_evaluate, "compute tau and hit rates"),
        ("run", cmd_run, "full pipeline: ingest through evaluate"),
    ]:
        p = sub.add_parser(name, help=doc)
        _add_config_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("bench", help="scaling or kernel benchmarks")
    p.add_argument("--mode", choices=["scaling", "kernels"], default="scaling")
    p.add_argument("--sizes", default="500,1000,2000",
                   help="comma-separated node counts for scaling mode")
    p.add_argument("--nodes", type=int, default=None, help="kernel bench size")
    p.add_argument("--runs", type=int, default=200, help="kernel bench runs/node")
    p.add_argument("--iterations", type=int, default=None,
                   help="override training iterations for scaling mode")
    p.add_argument("-o", "--out", default=None, help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic temporal edge list")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--snapshots", type=int, required=True)
    p.add_argument("--mean-degree", type=float, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--activity-sigma", type=float, default=0.8)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
