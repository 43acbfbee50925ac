"""Run output bundles: manifest, metrics CSV, snapshot JSONL, regime JSON and step log.

Every writer here is deterministic (sorted keys, no timestamps, gzip
``mtime=0``) so that two runs of the same manifest produce byte-identical
directories.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import RegimeReport, Thresholds, classify_regime
from .config import SimulationConfig, config_from_mapping, config_to_mapping
from .engine import COL_CHANGES, N_COUNTERS
from .metrics import MetricsRecord
from .rng import GENERATOR_NAME
from .simulate import RunResult, SnapshotRecord, run_simulation

MANIFEST = "manifest.json"
METRICS = "metrics.csv"
SNAPSHOTS = "snapshots.jsonl"
REGIME = "regime.json"
STEPS = "steps.csv.gz"

SCHEMAS = {
    MANIFEST: "hiergrain.manifest/1",
    METRICS: "hiergrain.metrics/1",
    SNAPSHOTS: "hiergrain.snapshots/1",
    REGIME: "hiergrain.regime/1",
    STEPS: "hiergrain.steps/1",
}

STEP_COLUMNS = ["timestep", "drops", "adoptions", "choice_changes", "effective", "simple", "same_label"]


class BundleError(ValueError):
    """A run directory is missing files or does not parse."""


@dataclass
class RunManifest:
    config: SimulationConfig
    master_seed: int
    replicate_index: int = 0
    cell_index: int = 0
    code_version: str = __version__
    generator: str = GENERATOR_NAME
    full_snapshots: bool = False
    schemas: dict[str, str] = field(default_factory=lambda: dict(SCHEMAS))

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": config_to_mapping(self.config),
            "master_seed": self.master_seed,
            "replicate_index": self.replicate_index,
            "cell_index": self.cell_index,
            "code_version": self.code_version,
            "generator": self.generator,
            "full_snapshots": self.full_snapshots,
            "schemas": self.schemas,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunManifest":
        return cls(
            config=config_from_mapping(d["config"]),
            master_seed=d["master_seed"],
            replicate_index=d["replicate_index"],
            cell_index=d["cell_index"],
            code_version=d["code_version"],
            generator=d["generator"],
            full_snapshots=d["full_snapshots"],
            schemas=d["schemas"],
        )


def dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# metrics.csv


def metrics_columns(num_labels: int, num_issues: int) -> list[str]:
    return (
        ["timestep", "sw_index", "cosine_index"]
        + [f"sw_label_{l}" for l in range(num_labels)]
        + ["n_choice_changes_window", "n_label_switches_window", "mutual_information"]
        + [f"mi_issue_{i}" for i in range(num_issues)]
        + ["ab_min", "ab_q1", "ab_median", "ab_q3", "ab_max", "agent_entropy_mean",
           "n_labeled", "n_unlabeled"]
    )


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics(path: Path, records: list[MetricsRecord], config: SimulationConfig) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(metrics_columns(config.num_labels, config.num_issues))
        for r in records:
            mi_issues = r.mi_per_issue if r.mi_per_issue is not None else [None] * config.num_issues
            row = ([r.timestep, r.sw_index, r.cosine_index] + list(r.per_label_sw)
                   + [r.n_choice_changes_window, r.n_label_switches_window, r.mutual_information]
                   + list(mi_issues)
                   + [r.ab_min, r.ab_q1, r.ab_median, r.ab_q3, r.ab_max, r.agent_entropy_mean,
                      r.n_labeled, r.n_unlabeled])
            writer.writerow([_fmt(v) for v in row])


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def read_metrics(path: Path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BundleError(f"{path}: empty metrics file") from None
        sw_cols = [k for k, h in enumerate(header) if h.startswith("sw_label_")]
        mi_cols = [k for k, h in enumerate(header) if h.startswith("mi_issue_")]
        col = {h: k for k, h in enumerate(header)}
        records = []
        for row in reader:
            if len(row) != len(header):
                raise BundleError(f"{path}: ragged row {row!r}")
            mi = [_opt_float(row[k]) for k in mi_cols]
            records.append(MetricsRecord(
                timestep=int(row[col["timestep"]]),
                sw_index=_opt_float(row[col["sw_index"]]),
                cosine_index=_opt_float(row[col["cosine_index"]]),
                per_label_sw=[_opt_float(row[k]) for k in sw_cols],
                n_choice_changes_window=int(row[col["n_choice_changes_window"]]),
                n_label_switches_window=int(row[col["n_label_switches_window"]]),
                mutual_information=_opt_float(row[col["mutual_information"]]),
                mi_per_issue=None if any(v is None for v in mi) else mi,
                ab_min=int(row[col["ab_min"]]),
                ab_q1=float(row[col["ab_q1"]]),
                ab_median=float(row[col["ab_median"]]),
                ab_q3=float(row[col["ab_q3"]]),
                ab_max=int(row[col["ab_max"]]),
                agent_entropy_mean=float(row[col["agent_entropy_mean"]]),
                n_labeled=int(row[col["n_labeled"]]),
                n_unlabeled=int(row[col["n_unlabeled"]]),
            ))
    if not records:
        raise BundleError(f"{path}: no metric rows")
    return records


# --------------------------------------------------------------------------
# snapshots.jsonl and steps.csv.gz


def write_snapshots(path: Path, snapshots: list[SnapshotRecord]) -> None:
    with open(path, "w") as fh:
        for s in snapshots:
            obj = {"timestep": s.timestep, "label_hist": s.label_hist, "global_hist": s.global_hist,
                   "unlabeled_hist": s.unlabeled_hist}
            if s.agents is not None:
                obj["agents"] = s.agents
            fh.write(json.dumps(obj, sort_keys=True, allow_nan=False) + "\n")


def read_snapshots(path: Path) -> list[SnapshotRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(SnapshotRecord(d["timestep"], d["label_hist"], d["global_hist"],
                                          d["unlabeled_hist"], d.get("agents")))
    return out


def write_steps(path: Path, steps: np.ndarray) -> None:
    buf = io.StringIO()
    buf.write(",".join(STEP_COLUMNS) + "\n")
    for k, row in enumerate(steps):
        buf.write(f"{k + 1}," + ",".join(str(int(v)) for v in row) + "\n")
    with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
        gz.write(buf.getvalue().encode())


def read_steps(path: Path) -> np.ndarray:
    with gzip.open(path, "rt") as fh:
        header = fh.readline().strip().split(",")
        if header != STEP_COLUMNS:
            raise BundleError(f"{path}: unexpected step columns {header}")
        rows = [line.split(",")[1:] for line in fh if line.strip()]
    if not rows:
        return np.zeros((0, N_COUNTERS), dtype=np.int64)
    return np.array(rows, dtype=np.int64)


# --------------------------------------------------------------------------
# whole bundles


@dataclass
class Bundle:
    path: Path
    manifest: RunManifest
    records: list[MetricsRecord]
    regime: RegimeReport
    steps: np.ndarray
    _snapshots: list[SnapshotRecord] | None = None

    @property
    def snapshots(self) -> list[SnapshotRecord]:
        if self._snapshots is None:
            self._snapshots = read_snapshots(self.path / SNAPSHOTS)
        return self._snapshots


def analyze_result(records: list[MetricsRecord], steps: np.ndarray, config: SimulationConfig,
                   thresholds: Thresholds | None = None) -> RegimeReport:
    return classify_regime(records, config, thresholds, step_changes=steps[:, COL_CHANGES])


def write_bundle(out_dir: str | Path, result: RunResult, manifest: RunManifest,
                 thresholds: Thresholds | None = None) -> RegimeReport:
    """Write all files of one run; the manifest goes last and marks completion.

    Files are staged in a sibling temporary directory and moved into place,
    so an interrupted write never leaves a directory that looks complete.
    """
    out_dir = Path(out_dir).resolve()
    if out_dir.exists() and any(out_dir.iterdir()) and not (out_dir / MANIFEST).exists():
        raise BundleError(f"{out_dir}: exists and is not a run bundle; refusing to overwrite")
    stage = out_dir.with_name(out_dir.name + ".partial")
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir(parents=True)
    report = analyze_result(result.records, result.steps, result.config, thresholds)
    write_metrics(stage / METRICS, result.records, result.config)
    write_snapshots(stage / SNAPSHOTS, result.snapshots)
    write_steps(stage / STEPS, result.steps)
    (stage / REGIME).write_text(dump_json(report.to_dict()))
    (stage / MANIFEST).write_text(dump_json(manifest.to_dict()))
    if out_dir.exists():
        shutil.rmtree(out_dir)
    os.replace(stage, out_dir)
    return report


def read_manifest(run_dir: str | Path) -> RunManifest:
    path = Path(run_dir) / MANIFEST
    try:
        return RunManifest.from_dict(json.loads(path.read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BundleError(f"{path}: unreadable manifest ({exc})") from exc


def read_bundle(run_dir: str | Path) -> Bundle:
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    try:
        records = read_metrics(run_dir / METRICS)
        regime = RegimeReport.from_dict(json.loads((run_dir / REGIME).read_text()))
        steps = read_steps(run_dir / STEPS)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BundleError(f"{run_dir}: corrupt bundle ({exc})") from exc
    return Bundle(run_dir, manifest, records, regime, steps)


def find_bundles(root: str | Path) -> list[Path]:
    """Run directories (those holding a manifest) under ``root``, sorted."""
    root = Path(root)
    return sorted(p.parent for p in root.rglob(MANIFEST) if not p.parent.name.endswith(".partial"))


def simulate_to_bundle(config: SimulationConfig, out_dir: str | Path, *, master_seed: int | None = None,
                       replicate_index: int = 0, cell_index: int = 0, full_snapshots: bool = False,
                       thresholds: Thresholds | None = None) -> RegimeReport:
    result = run_simulation(config, full_snapshots=full_snapshots)
    manifest = RunManifest(config=config,
                           master_seed=config.seed if master_seed is None else master_seed,
                           replicate_index=replicate_index, cell_index=cell_index,
                           full_snapshots=full_snapshots)
    return write_bundle(out_dir, result, manifest, thresholds)
