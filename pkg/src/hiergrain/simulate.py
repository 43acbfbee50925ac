"""Drive a single run: initialize, step, and sample on the snapshot schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimulationConfig, validate_config
from .engine import N_COUNTERS, run_steps
from .metrics import MetricsRecord, WindowCounters, collect, label_histograms, preference_weights
from .population import Population, init_population
from .rng import Stream


@dataclass
class SnapshotRecord:
    """Preferred-choice distributions at one sampling instant.

    Histograms hold tie-split agent counts. ``label_hist`` is indexed
    (label, issue, choice); ``global_hist`` covers every agent including
    the unlabeled ones, whose share is also given separately.
    ``agents`` is only filled for full snapshots: one
    ``{"label": int | None, "strengths": [[...], ...]}`` entry per agent.
    """

    timestep: int
    label_hist: list
    global_hist: list
    unlabeled_hist: list
    agents: list | None = None


def take_snapshot(pop: Population, config: SimulationConfig, full: bool = False) -> SnapshotRecord:
    weights = preference_weights(pop.strengths)
    hist = label_histograms(pop, config.num_labels, weights)
    unlabeled = weights[pop.labels < 0].sum(axis=0)
    agents = None
    if full:
        agents = [
            {"label": None if lab < 0 else int(lab), "strengths": row.tolist()}
            for lab, row in zip(pop.labels, pop.strengths)
        ]
    return SnapshotRecord(
        timestep=pop.timestep,
        label_hist=hist.tolist(),
        global_hist=weights.sum(axis=0).tolist(),
        unlabeled_hist=np.asarray(unlabeled, dtype=np.float64).reshape(
            config.num_issues, config.num_choices).tolist(),
        agents=agents,
    )


@dataclass
class RunResult:
    config: SimulationConfig
    records: list[MetricsRecord]
    steps: np.ndarray  # (max_timesteps, N_COUNTERS), row k is timestep k + 1
    snapshots: list[SnapshotRecord] = field(default_factory=list)
    population: Population | None = None


def record_times(config: SimulationConfig) -> list[int]:
    """Sampling instants: t = 0 and every snapshot_interval steps after it."""
    return list(range(0, config.max_timesteps + 1, config.snapshot_interval))


def run_simulation(config: SimulationConfig, full_snapshots: bool = False,
                   keep_snapshots: bool = True) -> RunResult:
    """Execute one full run of ``config`` from its own seed."""
    validate_config(config)
    rng = Stream(config.seed)
    pop = init_population(config, rng)
    counters = WindowCounters()
    steps = np.zeros((config.max_timesteps, N_COUNTERS), dtype=np.int64)
    records = [collect(pop, config, counters)]
    snapshots = [take_snapshot(pop, config, full_snapshots)] if keep_snapshots else []
    for t0 in record_times(config)[:-1]:
        chunk = run_steps(pop, config, rng, config.snapshot_interval)
        steps[t0:t0 + config.snapshot_interval] = chunk
        counters.add(chunk)
        records.append(collect(pop, config, counters))
        if keep_snapshots:
            snapshots.append(take_snapshot(pop, config, full_snapshots))
    # trailing steps past the last sampling instant are still simulated
    t0 = pop.timestep
    if t0 < config.max_timesteps:
        steps[t0:] = run_steps(pop, config, rng, config.max_timesteps - t0)
    return RunResult(config, records, steps, snapshots, pop)
