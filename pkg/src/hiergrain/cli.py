"""Command-line entry point: ``hiergrain simulate | sweep | analyze | plot``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .analysis import Thresholds, load_thresholds
from .bundle import (REGIME, BundleError, dump_json, analyze_result, find_bundles, read_bundle,
                     simulate_to_bundle)
from .config import ConfigError, load_config, validate_config
from .plotting import PlotError, make_plots
from .sweep import aggregate, load_grid, run_sweep

log = logging.getLogger("hiergrain")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

PHASE_TABLE = "phase_table.csv"
ANALYZE_WARNINGS = "analyze_warnings.log"


def _default_out(sub: str) -> Path:
    return Path(os.environ.get("HIERGRAIN_OUT", "hiergrain_out")) / sub


def _thresholds(args) -> Thresholds:
    return load_thresholds(args.thresholds) if args.thresholds else Thresholds()


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_timesteps is not None:
        overrides["max_timesteps"] = args.max_timesteps
    if overrides:
        config = validate_config(config.replace(**overrides))
    out = Path(args.out) if args.out else _default_out("run")
    report = simulate_to_bundle(config, out, full_snapshots=args.full_snapshots,
                                thresholds=_thresholds(args))
    print(f"{out}: {report.regime.value}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = load_grid(args.grid)
    out = Path(args.out) if args.out else _default_out("sweep")
    summary = run_sweep(grid, out, parallelism=args.jobs, full_snapshots=args.full_snapshots,
                        thresholds=_thresholds(args))
    print(f"{out}: {summary['completed']} completed, {summary['skipped']} skipped, "
          f"{summary['failed']} failed of {summary['planned']}")
    return EXIT_RUNTIME if summary["failed"] else EXIT_OK


def analyze_dir(runs_dir: Path, thresholds: Thresholds, out: Path | None = None) -> tuple[list, list[str]]:
    """Recompute every run's regime from its metrics and step log, then aggregate.

    Bundles are left untouched; recomputed reports, tables and a warnings
    log go to ``out`` (default: ``runs_dir``). Returns the aggregate rows
    and the warnings for skipped runs.
    """
    out = out or runs_dir
    out.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    reports = {}
    phase_rows = []
    for run_dir in find_bundles(runs_dir):
        try:
            bundle = read_bundle(run_dir)
        except BundleError as exc:
            warnings.append(str(exc))
            log.warning("skipping %s", exc)
            continue
        report = analyze_result(bundle.records, bundle.steps, bundle.manifest.config, thresholds)
        reports[run_dir] = report
        rel = run_dir.relative_to(runs_dir)
        pb = report.phase_boundaries or (None, None, None)
        phase_rows.append({
            "run": str(rel),
            "regime": report.regime.value,
            "t_local_align": report.t_local_align,
            "t_global_align": report.t_global_align,
            "end_phase_1": pb[0], "end_phase_2": pb[1], "end_phase_3": pb[2],
            "t_equilibrium": report.t_equilibrium,
            "rebound": report.rebound,
        })
        if out != runs_dir:
            (out / rel).mkdir(parents=True, exist_ok=True)
            (out / rel / REGIME).write_text(dump_json(report.to_dict()))
    rows = aggregate(runs_dir, out, regimes=reports)
    with open(out / PHASE_TABLE, "w", newline="") as fh:
        fields = ["run", "regime", "t_local_align", "t_global_align", "end_phase_1", "end_phase_2",
                  "end_phase_3", "t_equilibrium", "rebound"]
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(phase_rows)
    if warnings:
        with open(out / ANALYZE_WARNINGS, "w") as fh:
            fh.writelines(w + "\n" for w in warnings)
    return rows, warnings


def cmd_analyze(args) -> int:
    runs_dir = Path(args.runs_dir)
    if not runs_dir.is_dir():
        print(f"error: {runs_dir} is not a directory", file=sys.stderr)
        return EXIT_USAGE
    rows, warnings = analyze_dir(runs_dir, _thresholds(args), Path(args.out) if args.out else None)
    if not rows:
        print(f"warning: no readable bundles under {runs_dir}", file=sys.stderr)
    for w in warnings:
        print(f"warning: skipped {w}", file=sys.stderr)
    for row in rows:
        print(f"cell {row['cell_index']}: {row['majority']} ({row['breakdown']})")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = Path(args.out) if args.out else _default_out("plots")
    written = make_plots(args.runs, out, timesteps=args.timestep, render=not args.no_svg)
    for p in written:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiergrain", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and write its bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--max-timesteps", type=int)
    p.add_argument("--full-snapshots", action="store_true")
    p.add_argument("--thresholds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter grid with replicates")
    p.add_argument("--grid", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--full-snapshots", action="store_true")
    p.add_argument("--thresholds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="recompute regimes and tables for a directory of bundles")
    p.add_argument("runs_dir")
    p.add_argument("--out")
    p.add_argument("--thresholds")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="write plot specs (and SVGs) for bundles")
    p.add_argument("runs", nargs="+", help="run directories or their metrics.csv files")
    p.add_argument("--out")
    p.add_argument("--timestep", type=int, action="append", default=[],
                   help="snapshot instant for distribution panels (repeatable)")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BundleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
