"""Plot-description output for trajectory and distribution panels.

Each figure is written as a self-contained Vega-Lite spec with inlined
data. When matplotlib is importable an SVG rendering is written next to it.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .bundle import METRICS, Bundle, read_bundle

log = logging.getLogger(__name__)

VEGA_LITE_SCHEMA = "https://vega.github.io/schema/vega-lite/v5.json"


class PlotError(ValueError):
    pass


def resolve_run_dirs(paths: list[str | Path]) -> list[Path]:
    """Accept run directories or their metrics.csv files."""
    dirs = []
    for p in map(Path, paths):
        dirs.append(p.parent if p.name == METRICS or p.is_file() else p)
    return dirs


def _run_id(b: Bundle) -> str:
    m = b.manifest
    return f"cell{m.cell_index}/rep{m.replicate_index}"


def trajectory_rows(bundles: list[Bundle]) -> list[dict[str, Any]]:
    rows = []
    cells: dict[int, list[Bundle]] = {}
    for b in bundles:
        cells.setdefault(b.manifest.cell_index, []).append(b)
        for r in b.records:
            for metric in ("sw_index", "cosine_index"):
                v = getattr(r, metric)
                if v is not None:
                    rows.append({"run": _run_id(b), "cell": b.manifest.cell_index, "kind": "replicate",
                                 "timestep": r.timestep, "metric": metric, "value": v})
    for cell, group in sorted(cells.items()):
        by_t: dict[tuple[int, str], list[float]] = {}
        for b in group:
            for r in b.records:
                for metric in ("sw_index", "cosine_index"):
                    v = getattr(r, metric)
                    if v is not None:
                        by_t.setdefault((r.timestep, metric), []).append(v)
        for (t, metric), vals in sorted(by_t.items()):
            rows.append({"run": f"cell{cell}/mean", "cell": cell, "kind": "mean",
                         "timestep": t, "metric": metric, "value": float(np.mean(vals))})
    return rows


def phase_markers(bundles: list[Bundle]) -> list[dict[str, Any]]:
    marks = []
    for b in bundles:
        pb = b.regime.phase_boundaries
        if pb is None:
            continue
        for name, t in zip(("end of phase I", "end of phase II", "end of phase III"), pb):
            if t is not None:
                marks.append({"run": _run_id(b), "boundary": name, "timestep": t})
    return marks


def trajectory_spec(bundles: list[Bundle]) -> dict[str, Any]:
    layers: list[dict[str, Any]] = [{
        "data": {"values": trajectory_rows(bundles)},
        "mark": {"type": "line"},
        "encoding": {
            "x": {"field": "timestep", "type": "quantitative"},
            "y": {"field": "value", "type": "quantitative", "scale": {"domain": [0, 1]}},
            "color": {"field": "metric", "type": "nominal"},
            "detail": {"field": "run", "type": "nominal"},
            "opacity": {"condition": {"test": "datum.kind == 'mean'", "value": 1.0}, "value": 0.25},
        },
    }]
    marks = phase_markers(bundles)
    if marks:
        layers.append({
            "data": {"values": marks},
            "mark": {"type": "rule", "strokeDash": [4, 4]},
            "encoding": {"x": {"field": "timestep", "type": "quantitative"},
                         "tooltip": [{"field": "boundary"}, {"field": "run"}]},
        })
    return {"$schema": VEGA_LITE_SCHEMA, "title": "SW and cosine index", "layer": layers}


def _snapshot_at(b: Bundle, t: int):
    for s in b.snapshots:
        if s.timestep == t:
            return s
    available = [s.timestep for s in b.snapshots]
    raise PlotError(f"{b.path}: no snapshot at t={t}; available instants: {available}")


def histogram_spec(bundle: Bundle, t: int) -> dict[str, Any]:
    snap = _snapshot_at(bundle, t)
    rows = []
    for label, issues in enumerate(snap.label_hist):
        for issue, counts in enumerate(issues):
            for choice, n in enumerate(counts):
                rows.append({"level": f"label {label}", "issue": issue, "choice": choice, "agents": n})
    for issue, counts in enumerate(snap.global_hist):
        for choice, n in enumerate(counts):
            rows.append({"level": "global", "issue": issue, "choice": choice, "agents": n})
    return {
        "$schema": VEGA_LITE_SCHEMA,
        "title": f"Preferred-choice distribution, t={t} ({_run_id(bundle)})",
        "data": {"values": rows},
        "mark": "bar",
        "encoding": {
            "x": {"field": "choice", "type": "ordinal"},
            "y": {"field": "agents", "type": "quantitative"},
            "row": {"field": "level", "type": "nominal"},
            "column": {"field": "issue", "type": "ordinal"},
        },
        "resolve": {"scale": {"y": "independent"}},
    }


def strength_spec(bundle: Bundle, t: int, issue: int = 0) -> dict[str, Any] | None:
    """Mean and spread of strengths grouped by preferred choice (needs full snapshots)."""
    snap = _snapshot_at(bundle, t)
    if snap.agents is None:
        return None
    rows = []
    by_group: dict[tuple[int, int], list[list[float]]] = {}
    for agent in snap.agents:
        if agent["label"] is None:
            continue
        row = agent["strengths"][issue]
        by_group.setdefault((agent["label"], int(np.argmax(row))), []).append(row)
    for (label, pref), members in sorted(by_group.items()):
        arr = np.array(members)
        for choice, (mu, sd) in enumerate(zip(arr.mean(axis=0), arr.std(axis=0))):
            rows.append({"label": label, "preferred": pref, "choice": choice, "n": len(members),
                         "mean": float(mu), "lo": float(mu - sd), "hi": float(mu + sd)})
    return {
        "$schema": VEGA_LITE_SCHEMA,
        "title": f"Strengths by preferred choice, issue {issue}, t={t} ({_run_id(bundle)})",
        "data": {"values": rows},
        "facet": {"row": {"field": "label", "type": "ordinal"},
                  "column": {"field": "preferred", "type": "ordinal"}},
        "spec": {"layer": [
            {"mark": "bar", "encoding": {"x": {"field": "choice", "type": "ordinal"},
                                         "y": {"field": "mean", "type": "quantitative"}}},
            {"mark": "rule", "encoding": {"x": {"field": "choice", "type": "ordinal"},
                                          "y": {"field": "lo", "type": "quantitative"},
                                          "y2": {"field": "hi"}}},
        ]},
    }


def ab_spec(bundles: list[Bundle]) -> dict[str, Any]:
    rows = []
    for b in bundles:
        for r in b.records:
            for q in ("ab_q1", "ab_median", "ab_q3"):
                rows.append({"run": _run_id(b), "timestep": r.timestep, "quantile": q,
                             "value": getattr(r, q)})
    return {
        "$schema": VEGA_LITE_SCHEMA,
        "title": "Activation barrier quartiles",
        "data": {"values": rows},
        "mark": "line",
        "encoding": {
            "x": {"field": "timestep", "type": "quantitative"},
            "y": {"field": "value", "type": "quantitative", "scale": {"type": "symlog"}},
            "color": {"field": "quantile", "type": "nominal"},
            "detail": {"field": "run", "type": "nominal"},
        },
    }


def _write_spec(path: Path, spec: dict[str, Any]) -> None:
    path.write_text(json.dumps(spec, sort_keys=True, indent=1, allow_nan=False) + "\n")


def _render_svgs(out_dir: Path, bundles: list[Bundle], timesteps: list[int]) -> list[Path]:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.info("matplotlib unavailable; skipping SVG rendering")
        return []
    written = []

    fig, ax = plt.subplots(figsize=(8, 4))
    rows = trajectory_rows(bundles)
    for metric, color in (("sw_index", "tab:blue"), ("cosine_index", "tab:orange")):
        for kind, alpha in (("replicate", 0.25), ("mean", 1.0)):
            runs = sorted({r["run"] for r in rows if r["metric"] == metric and r["kind"] == kind})
            for k, run in enumerate(runs):
                pts = [(r["timestep"], r["value"]) for r in rows if r["run"] == run and r["metric"] == metric]
                ax.plot(*zip(*pts), color=color, alpha=alpha,
                        label=metric if kind == "mean" and k == 0 else None)
    for m in phase_markers(bundles):
        ax.axvline(m["timestep"], color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("timestep")
    ax.set_ylim(0, 1.02)
    ax.legend()
    path = out_dir / "trajectories.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    for b in bundles:
        ts = [r.timestep for r in b.records]
        ax.fill_between(ts, [r.ab_q1 for r in b.records], [r.ab_q3 for r in b.records], alpha=0.2)
        ax.plot(ts, [r.ab_median for r in b.records])
    ax.set_yscale("symlog")
    ax.set_xlabel("timestep")
    ax.set_ylabel("activation barrier")
    path = out_dir / "ab_quartiles.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    b = bundles[0]
    for t in timesteps:
        snap = _snapshot_at(b, t)
        hist = np.array(snap.label_hist)
        n_labels, n_issues, n_choices = hist.shape
        fig, axes = plt.subplots(n_labels + 1, n_issues, squeeze=False,
                                 figsize=(2.2 * n_issues, 1.2 * (n_labels + 1)), sharex=True)
        for i in range(n_issues):
            for l in range(n_labels):
                axes[l, i].bar(range(n_choices), hist[l, i])
            axes[n_labels, i].bar(range(n_choices), np.array(snap.global_hist)[i], color="black")
        axes[n_labels, 0].set_ylabel("global")
        path = out_dir / f"histograms_t{t}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def make_plots(run_dirs: list[str | Path], out_dir: str | Path, timesteps: list[int] | None = None,
               render: bool = True) -> list[Path]:
    """Write plot specs (and SVGs when possible) for the given bundles."""
    timesteps = list(timesteps or [])
    dirs = resolve_run_dirs(run_dirs)
    if not dirs:
        raise PlotError("no runs given")
    bundles = [read_bundle(d) for d in dirs]
    out_dir = Path(out_dir)
    # check requested instants before writing anything
    for t in timesteps:
        _snapshot_at(bundles[0], t)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, spec in (("trajectories", trajectory_spec(bundles)), ("ab_quartiles", ab_spec(bundles))):
        _write_spec(out_dir / f"{name}.vl.json", spec)
        written.append(out_dir / f"{name}.vl.json")
    for t in timesteps:
        _write_spec(out_dir / f"histograms_t{t}.vl.json", histogram_spec(bundles[0], t))
        written.append(out_dir / f"histograms_t{t}.vl.json")
        spec = strength_spec(bundles[0], t)
        if spec is not None:
            _write_spec(out_dir / f"strengths_t{t}.vl.json", spec)
            written.append(out_dir / f"strengths_t{t}.vl.json")
    if render:
        written.extend(_render_svgs(out_dir, bundles, timesteps))
    return written

