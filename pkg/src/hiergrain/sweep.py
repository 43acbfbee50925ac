"""Parameter grids, replicate scheduling and ensemble aggregation."""

from __future__ import annotations

import csv
import itertools
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import Regime, Thresholds
from .bundle import BundleError, find_bundles, read_bundle, read_manifest, simulate_to_bundle
from .config import (FIELD_TO_KEY, FILE_KEYS, ConfigError, SimulationConfig, read_toml,
                     validate_config)
from .rng import derive_replicate_seed

log = logging.getLogger(__name__)

JOURNAL = "sweep_journal.log"
REGIME_TABLE = "regime_table.csv"
MEAN_TRAJECTORIES = "mean_trajectories.csv"

FULL_GRID_VALUES: dict[str, list] = {
    "num_labels": [2, 6, 10],
    "num_issues": [1, 5, 10],
    "num_choices": [2, 5, 10],
    "multi_issue_discourse": [1, 5, 20],
    "strength_of_influence": [1, 5, 20],
    "ignoring": [True, False],
    "prob_dropping_label": [0.0, 0.0001, 0.0005, 0.001, 0.005, 0.01],
}

# declared parameter order for the cartesian product
PARAM_ORDER = [f for f in FILE_KEYS.values() if f != "seed"]


@dataclass
class SweepGrid:
    values: dict[str, list] = field(default_factory=dict)
    replicates: int = 10
    master_seed: int = 0
    base: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self):
        problems = []
        for name, vals in self.values.items():
            if name not in PARAM_ORDER:
                problems.append(f"unknown grid parameter {FIELD_TO_KEY.get(name, name)!r}")
            elif not isinstance(vals, list) or not vals:
                problems.append(f"{FIELD_TO_KEY[name]}: empty value list")
        if self.replicates < 1:
            problems.append("replicates: must be >= 1")
        if problems:
            raise ConfigError(problems)

    def varying(self) -> list[str]:
        return [p for p in PARAM_ORDER if p in self.values]


def full_grid(**kw) -> SweepGrid:
    return SweepGrid(values={k: list(v) for k, v in FULL_GRID_VALUES.items()}, **kw)


def presented_subset_grid(**kw) -> SweepGrid:
    """The slice of the full grid behind the presented results (SoI = MID = 20)."""
    values = {k: list(v) for k, v in FULL_GRID_VALUES.items()}
    values["multi_issue_discourse"] = [20]
    values["strength_of_influence"] = [20]
    values["prob_dropping_label"] = [0.0, 0.0001, 0.01]
    return SweepGrid(values=values, **kw)


def load_grid(path: str | Path) -> SweepGrid:
    """Read a grid file: config keys whose values may be lists, plus
    ``replicates`` and ``master-seed``."""
    data = dict(read_toml(path))
    replicates = data.pop("replicates", 10)
    master_seed = data.pop("master-seed", 0)
    problems = [f"unknown key {k!r}" for k in sorted(data) if k not in FILE_KEYS]
    if "seed" in data:
        problems.append("key 'seed' is not allowed in a grid (use 'master-seed')")
    if problems:
        raise ConfigError(problems)
    fixed, values = {}, {}
    for key, v in data.items():
        name = FILE_KEYS[key]
        if isinstance(v, list):
            values[name] = v
        else:
            fixed[name] = v
    base = SimulationConfig().replace(**fixed)
    return SweepGrid(values=values, replicates=replicates, master_seed=master_seed, base=base)


def expand_grid(grid: SweepGrid) -> list[tuple[int, SimulationConfig]]:
    """Cartesian product in declared parameter order, last parameter fastest."""
    names = grid.varying()
    cells = []
    for index, combo in enumerate(itertools.product(*(grid.values[n] for n in names))):
        try:
            config = validate_config(grid.base.replace(**dict(zip(names, combo))))
        except ConfigError as exc:
            raise ConfigError([f"cell {index}: {p}" for p in exc.problems]) from exc
        cells.append((index, config))
    return cells


def run_dir_name(cell_index: int, replicate_index: int) -> str:
    return f"cell_{cell_index:04d}/rep_{replicate_index:02d}"


@dataclass(frozen=True)
class RunTask:
    cell_index: int
    replicate_index: int
    config: SimulationConfig
    master_seed: int
    out_dir: str
    full_snapshots: bool
    thresholds: Thresholds


def _is_complete(task: RunTask) -> bool:
    try:
        manifest = read_manifest(task.out_dir)
    except BundleError:
        return False
    return manifest.config == task.config and manifest.master_seed == task.master_seed


def _execute(task: RunTask) -> tuple[str, str, str]:
    name = run_dir_name(task.cell_index, task.replicate_index)
    try:
        report = simulate_to_bundle(task.config, task.out_dir, master_seed=task.master_seed,
                                    replicate_index=task.replicate_index, cell_index=task.cell_index,
                                    full_snapshots=task.full_snapshots, thresholds=task.thresholds)
    except (OSError, BundleError) as exc:
        return name, "failed", str(exc)
    return name, "completed", report.regime.value


def plan_runs(grid: SweepGrid, out_root: str | Path, full_snapshots: bool = False,
              thresholds: Thresholds | None = None) -> list[RunTask]:
    out_root = Path(out_root)
    tasks = []
    for cell_index, config in expand_grid(grid):
        for rep in range(grid.replicates):
            seed = derive_replicate_seed(grid.master_seed, cell_index, rep)
            tasks.append(RunTask(cell_index, rep, config.replace(seed=seed), grid.master_seed,
                                 str(out_root / run_dir_name(cell_index, rep)), full_snapshots,
                                 thresholds or Thresholds()))
    return tasks


def run_sweep(grid: SweepGrid, out_root: str | Path, parallelism: int = 1, full_snapshots: bool = False,
              thresholds: Thresholds | None = None) -> dict[str, int]:
    """Run every (cell, replicate) not already complete, then aggregate.

    Results do not depend on ``parallelism``: each run has its own derived
    seed and writes only to its own directory, and the journal is appended
    by this process in task order.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    tasks = plan_runs(grid, out_root, full_snapshots, thresholds)
    todo = [t for t in tasks if not _is_complete(t)]
    summary = {"planned": len(tasks), "skipped": len(tasks) - len(todo), "completed": 0, "failed": 0}
    log.info("sweep: %d runs planned, %d already complete", len(tasks), summary["skipped"])

    if parallelism <= 1 or len(todo) <= 1:
        results = map(_execute, todo)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=parallelism)
        results = pool.map(_execute, todo)
    try:
        with open(out_root / JOURNAL, "a") as journal:
            for name, status, detail in results:
                summary[status] += 1
                journal.write(f"{status}\t{name}\t{detail}\n")
                journal.flush()
                if status == "failed":
                    log.warning("run %s failed: %s", name, detail)
    finally:
        if pool is not None:
            pool.shutdown()

    (out_root / "sweep.json").write_text(json.dumps(grid_description(grid), sort_keys=True, indent=2) + "\n")
    aggregate(out_root)
    return summary


def grid_description(grid: SweepGrid) -> dict[str, Any]:
    return {
        "values": {FIELD_TO_KEY[k]: v for k, v in grid.values.items()},
        "base": {FIELD_TO_KEY[k]: v for k, v in grid.base.to_dict().items() if k != "seed"},
        "replicates": grid.replicates,
        "master-seed": grid.master_seed,
    }


# --------------------------------------------------------------------------
# aggregation


def majority_regime(regimes: list[str]) -> str:
    """Most frequent regime; a tie for first place is reported as Unclassified."""
    if not regimes:
        return Regime.UNCLASSIFIED.value
    ranked = Counter(regimes).most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return Regime.UNCLASSIFIED.value
    return ranked[0][0]


def aggregate(root: str | Path, out: str | Path | None = None, regimes: dict | None = None,
              warnings: list[str] | None = None) -> list[dict[str, Any]]:
    """Write the per-cell regime table and replicate-mean trajectories.

    Bundles are read from ``root``; tables go to ``out`` (default ``root``).

    ``regimes`` optionally maps run directory -> regime report, overriding
    the stored ``regime.json`` (used when re-analyzing with new thresholds).
    """
    root = Path(root)
    out = Path(out) if out is not None else root
    cells: dict[int, list] = {}
    for run_dir in find_bundles(root):
        try:
            bundle = read_bundle(run_dir)
        except BundleError as exc:
            log.warning("skipping %s", exc)
            if warnings is not None:
                warnings.append(str(exc))
            continue
        report = regimes.get(run_dir, bundle.regime) if regimes else bundle.regime
        cells.setdefault(bundle.manifest.cell_index, []).append((bundle, report))

    rows = []
    traj_rows = []
    for cell_index in sorted(cells):
        runs = sorted(cells[cell_index], key=lambda br: br[0].manifest.replicate_index)
        config = runs[0][0].manifest.config
        labels = [r.regime.value for _, r in runs]
        counts = Counter(labels)
        row = {"cell_index": cell_index}
        row.update({FIELD_TO_KEY[p]: getattr(config, p) for p in PARAM_ORDER})
        row.update({"replicates": len(runs)})
        row.update({f"n_{reg.value}": counts.get(reg.value, 0) for reg in Regime})
        row["majority"] = majority_regime(labels)
        row["breakdown"] = ";".join(labels)
        rows.append(row)
        traj_rows.extend(_mean_trajectory(cell_index, [b for b, _ in runs]))

    fieldnames = (["cell_index"] + [FIELD_TO_KEY[p] for p in PARAM_ORDER] + ["replicates"]
                  + [f"n_{reg.value}" for reg in Regime] + ["majority", "breakdown"])
    _write_csv(out / REGIME_TABLE, fieldnames, rows)
    _write_csv(out / MEAN_TRAJECTORIES,
               ["cell_index", "timestep", "n", "sw_mean", "cosine_mean", "mi_mean", "ab_median_mean"],
               traj_rows)
    return rows


def _nanmean(values: list) -> float | None:
    arr = np.array([np.nan if v is None else v for v in values], dtype=np.float64)
    if np.isnan(arr).all():
        return None
    return float(np.nanmean(arr))


def _mean_trajectory(cell_index: int, bundles: list) -> list[dict[str, Any]]:
    by_time: dict[int, list] = {}
    for b in bundles:
        for r in b.records:
            by_time.setdefault(r.timestep, []).append(r)
    rows = []
    for t in sorted(by_time):
        recs = by_time[t]
        rows.append({
            "cell_index": cell_index, "timestep": t, "n": len(recs),
            "sw_mean": _nanmean([r.sw_index for r in recs]),
            "cosine_mean": _nanmean([r.cosine_index for r in recs]),
            "mi_mean": _nanmean([r.mutual_information for r in recs]),
            "ab_median_mean": _nanmean([r.ab_median for r in recs]),
        })
    return rows


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
