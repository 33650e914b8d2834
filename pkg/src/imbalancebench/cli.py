"""Command-line interface.

Subcommands:

    gt-estimate   Monte-Carlo ground-truth metrics for a scenario (CSV row)
    simulate      run a sweep from a config file, streaming records to disk
    aggregate     build report artifacts from a results directory
    validate      schema/constraint check of a config file

Exit codes: 0 success, 1 usage/config error, 2 runtime failure.  The
default output directory can be set with the IMBALANCEBENCH_OUTPUT
environment variable (flags and config values win over it).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from .analysis import write_reports
from .config import ConfigError, load_config, preset_scenario
from .oracle import estimate_gt_metrics
from .pipeline import load_records, run_experiment, write_consolidated_csv
from .synth import InvalidScenarioError, ScenarioSpec, build_tvs

OUTPUT_ENV = "IMBALANCEBENCH_OUTPUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imbalancebench",
        description="Seeded anomaly-detection benchmark on synthetic two-class data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gt = sub.add_parser("gt-estimate", help="estimate ground-truth metrics for a scenario")
    gt.add_argument("--scenario", required=True, help="preset name (S1, S2) or scenario JSON file")
    gt.add_argument("--batches", type=int, default=10240)
    gt.add_argument("--batch-size", type=int, default=1024)
    gt.add_argument("--seed", type=int, default=0)
    gt.add_argument("--target-fpr", type=float, default=0.01)
    gt.add_argument("--output", default=None, help="write the CSV here instead of stdout")

    sim = sub.add_parser("simulate", help="run the configured sweep")
    sim.add_argument("--config", required=True)
    sim.add_argument("--resume", action="store_true", help="skip already-persisted simulations")
    sim.add_argument("--parallelism", type=int, default=None, help="override config parallelism")
    sim.add_argument("--output", default=None, help="override the configured output directory")

    agg = sub.add_parser("aggregate", help="emit report artifacts from persisted records")
    agg.add_argument("--results", required=True)
    agg.add_argument(
        "--report",
        default="all",
        choices=["ranks", "cd", "category-max", "bounds", "selection", "all"],
    )
    agg.add_argument("--out", default=None, help="report directory (default <results>/../reports)")
    agg.add_argument("--svg", action="store_true", help="also render static SVG plots")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)
    return parser


def _load_scenario(arg: str) -> tuple[str, ScenarioSpec]:
    if arg in ("S1", "S2"):
        return arg, preset_scenario(arg)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"unknown scenario {arg!r}: not a preset and no such file")
    import json

    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    try:
        return path.stem, ScenarioSpec.from_json_dict(obj)
    except (InvalidScenarioError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}")


def _cmd_gt_estimate(args) -> int:
    name, spec = _load_scenario(args.scenario)
    dist = build_tvs(spec)
    gt = estimate_gt_metrics(
        dist,
        target_fpr=args.target_fpr,
        batches=args.batches,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario", "fpr", "fnr", "aucroc", "n_points", "seed"])
    writer.writerow([name, repr(gt.fpr), repr(gt.fnr), repr(gt.aucroc), gt.n_points, args.seed])
    text = buf.getvalue()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    exp = load_config(args.config)
    results_dir = Path(
        args.output or os.environ.get(OUTPUT_ENV) or exp.output_dir
    )
    count = 0
    for record in run_experiment(
        exp, results_dir=results_dir, resume=args.resume, parallelism=args.parallelism
    ):
        count += 1
        print(
            f"[{count}] {record.config.coordinate_key()} -> {record.status}",
            file=sys.stderr,
        )
    csv_path = write_consolidated_csv(results_dir)
    print(f"wrote {csv_path}", file=sys.stderr)
    return 0


def _cmd_aggregate(args) -> int:
    results_dir = Path(args.results)
    records = load_records(results_dir)
    if not records:
        print(f"no records found under {results_dir}", file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else results_dir.parent / "reports"
    written = write_reports(records, out_dir, args.report)
    if args.svg:
        from .plots import render_svg_reports

        written += render_svg_reports(records, out_dir, args.report)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: ok")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    handlers = {
        "gt-estimate": _cmd_gt_estimate,
        "simulate": _cmd_simulate,
        "aggregate": _cmd_aggregate,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, InvalidScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
