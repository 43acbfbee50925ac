"""Regime classification and phase detection from metric time series."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .config import SimulationConfig, read_toml, ConfigError


class Regime(str, Enum):
    INDEPENDENT = "Independent"
    PARALLEL = "Parallel"
    ITERATIVE = "Iterative"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class Thresholds:
    eps_sw: float = 0.05
    eps_cos: float = 0.01
    rebound_delta: float = 0.05
    plateau_tol: float = 0.01
    plateau_window: int = 1000

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_THRESHOLD_KEYS = {
    "eps-sw": "eps_sw",
    "eps-cos": "eps_cos",
    "rebound-delta": "rebound_delta",
    "plateau-tol": "plateau_tol",
    "plateau-window": "plateau_window",
}


def load_thresholds(path: str | Path) -> Thresholds:
    data = read_toml(path)
    unknown = sorted(set(data) - set(_THRESHOLD_KEYS))
    if unknown:
        raise ConfigError([f"unknown threshold key {k!r}" for k in unknown])
    return Thresholds(**{_THRESHOLD_KEYS[k]: v for k, v in data.items()})


class PhaseError(ValueError):
    pass


@dataclass
class RegimeReport:
    regime: Regime
    t_local_align: int | None = None
    t_global_align: int | None = None
    transient_diversity_peak: tuple[int, float] | None = None
    rebound: float | None = None
    phase_boundaries: tuple[int, int, int | None] | None = None
    t_equilibrium: int | None = None
    t_quiescent: int | None = None
    thresholds_used: dict[str, Any] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["regime"] = self.regime.value
        for key in ("transient_diversity_peak", "phase_boundaries"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RegimeReport":
        d = dict(d)
        d["regime"] = Regime(d["regime"])
        for key in ("transient_diversity_peak", "phase_boundaries"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _series(series: Sequence, name: str) -> np.ndarray:
    return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in series],
                    dtype=np.float64)


def detect_alignment_times(series: Sequence, eps_sw: float, eps_cos: float) -> tuple[int | None, int | None]:
    """Return (t_local, t_global).

    Local alignment is the first record with SW below ``eps_sw``. Global
    alignment is the start of the trailing run of records whose cosine
    stays above ``1 - eps_cos`` through the end of the series: labels drawn
    from the same initial distribution already look aligned at t = 0, so
    only alignment that holds to the end of the run counts.
    """
    if not series:
        raise ValueError("empty series")
    times = [r.timestep for r in series]
    sw = _series(series, "sw_index")
    cos = _series(series, "cosine_index")
    below = np.flatnonzero(sw < eps_sw)
    t_local = times[below[0]] if below.size else None
    t_global = None
    aligned = cos > 1.0 - eps_cos
    if aligned[-1]:
        k = len(aligned) - 1
        while k > 0 and aligned[k - 1]:
            k -= 1
        t_global = times[k]
    return t_local, t_global


def detect_equilibrium(step_reports: Iterable | np.ndarray, window: int, start: int = 1) -> int | None:
    """First timestep opening ``window`` consecutive steps without preferred-choice changes.

    ``step_reports`` is either a sequence of ``StepReport`` or a plain
    array of per-step change counts whose first entry is timestep ``start``.
    """
    if isinstance(step_reports, np.ndarray):
        changes = step_reports
        times = np.arange(start, start + len(changes))
    else:
        reports = list(step_reports)
        changes = np.array([r.n_preferred_choice_changes for r in reports], dtype=np.int64)
        times = np.array([r.timestep for r in reports], dtype=np.int64)
    run = 0
    for k, c in enumerate(changes):
        if c == 0:
            run += 1
            if run >= window:
                return int(times[k - window + 1])
        else:
            run = 0
    return None


def _rebound(series: Sequence, t_local: int) -> tuple[tuple[int, float] | None, float | None, int | None]:
    times = np.array([r.timestep for r in series])
    sw = _series(series, "sw_index")
    after = np.flatnonzero(times > t_local)
    after = after[~np.isnan(sw[after])]
    if after.size == 0:
        return None, None, None
    k_local = int(np.flatnonzero(times == t_local)[0])
    peak = int(after[np.argmax(sw[after])])
    trough = float(np.nanmin(sw[k_local:peak + 1]))
    return (int(times[peak]), float(sw[peak])), float(sw[peak] - trough), k_local


def detect_phases(series: Sequence, thresholds: Thresholds,
                  t_equilibrium: int | None = None) -> tuple[int, int, int | None]:
    """End of phase I, II and III for an iterative run.

    Phase III's end is the equilibrium time and is ``None`` when the run
    never settled. Raises :class:`PhaseError` when local alignment does not
    strictly precede global alignment.
    """
    t_local, t_global = detect_alignment_times(series, thresholds.eps_sw, thresholds.eps_cos)
    if t_local is None or t_global is None:
        raise PhaseError("phases need both local and global alignment")
    if not t_local < t_global:
        raise PhaseError(f"local alignment ({t_local}) does not precede global alignment ({t_global})")
    if t_equilibrium is not None and not t_global < t_equilibrium:
        raise PhaseError(f"equilibrium ({t_equilibrium}) does not follow global alignment ({t_global})")
    return t_local, t_global, t_equilibrium


def _plateaued(series: Sequence, thresholds: Thresholds) -> bool:
    last = series[-1].timestep
    window = [r.cosine_index for r in series
              if r.timestep >= last - thresholds.plateau_window and r.cosine_index is not None]
    if last < thresholds.plateau_window or len(window) < 2:
        return False
    return max(window) - min(window) < thresholds.plateau_tol


def classify_regime(series: Sequence, config: SimulationConfig | None = None,
                    thresholds: Thresholds | None = None,
                    step_changes: np.ndarray | None = None) -> RegimeReport:
    """Classify one run from its metric series and per-step change counts.

    ``step_changes[k]`` is the number of preferred-choice changes at
    timestep k + 1. The equilibrium window comes from ``config``.
    """
    thresholds = thresholds or Thresholds()
    window = config.equilibrium_window if config is not None else 1000
    t_local, t_global = detect_alignment_times(series, thresholds.eps_sw, thresholds.eps_cos)
    report = RegimeReport(Regime.UNCLASSIFIED, t_local_align=t_local, t_global_align=t_global,
                          thresholds_used={**thresholds.to_dict(), "equilibrium_window": window})

    if step_changes is not None:
        report.t_quiescent = detect_equilibrium(np.asarray(step_changes), window)
    if report.t_quiescent is not None:
        # settling cannot be dated before the alignment it settles into
        report.t_equilibrium = max(t for t in (report.t_quiescent, t_local, t_global) if t is not None)

    rebounded = False
    if t_local is not None:
        peak, rise, k_local = _rebound(series, t_local)
        report.transient_diversity_peak = peak
        report.rebound = rise
        if peak is not None:
            rebounded = peak[1] > series[k_local].sw_index + thresholds.rebound_delta

    if t_local is None:
        report.diagnostics.append("no local alignment")
    elif t_global is None:
        if _plateaued(series, thresholds):
            report.regime = Regime.INDEPENDENT
        else:
            report.diagnostics.append("no global alignment and cosine still moving at run end")
    elif t_global <= t_local:
        if rebounded:
            report.diagnostics.append("global alignment first but within-label diversity rebounded")
        else:
            report.regime = Regime.PARALLEL
    elif rebounded:
        report.regime = Regime.ITERATIVE
        try:
            report.phase_boundaries = detect_phases(series, thresholds, report.t_equilibrium)
        except PhaseError as exc:
            report.regime = Regime.UNCLASSIFIED
            report.diagnostics.append(str(exc))
        else:
            if report.t_equilibrium is None:
                report.diagnostics.append("phase III did not end before the run stopped")
    else:
        report.diagnostics.append("local alignment before global alignment without a rebound")
    return report
