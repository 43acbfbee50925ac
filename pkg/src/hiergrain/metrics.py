"""Observables computed from a population snapshot.

All functions here are pure: ties in an agent's strength row split that
agent's unit of mass equally across the tied choices instead of sampling,
so a metric is a deterministic function of state. Unlabeled agents are
left out of the label-indexed quantities (frequency table, SW, cosine,
mutual information) but are counted in the record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimulationConfig
from .population import AgentState, Population


class UndefinedMetric(ValueError):
    """The metric has no value for this state (e.g. no nonempty labels)."""


@dataclass
class ChoiceFrequencyTable:
    """Per-label preferred-choice frequencies.

    ``p`` has shape (num_labels, num_issues, num_choices); ``p[l, i, c]`` is
    the fraction of label ``l``'s members whose metric weight on issue
    ``i`` falls on choice ``c``. Rows of empty labels are all zero and
    flagged by ``labeled_count[l] == 0``.
    """

    p: np.ndarray
    labeled_count: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return self.labeled_count > 0

    @property
    def num_choices(self) -> int:
        return self.p.shape[2]


def preference_weights(strengths: np.ndarray) -> np.ndarray:
    """Tie-split indicator of the maximal choices along the last axis."""
    top = strengths.max(axis=-1, keepdims=True)
    mask = (strengths == top).astype(np.float64)
    return mask / mask.sum(axis=-1, keepdims=True)


def label_histograms(pop: Population, num_labels: int, weights: np.ndarray | None = None) -> np.ndarray:
    """Summed preference weights per label: shape (num_labels, issues, choices)."""
    if weights is None:
        weights = preference_weights(pop.strengths)
    n, n_issues, n_choices = weights.shape
    hist = np.zeros((num_labels, n_issues * n_choices))
    labeled = pop.labels >= 0
    np.add.at(hist, pop.labels[labeled], weights[labeled].reshape(-1, n_issues * n_choices))
    return hist.reshape(num_labels, n_issues, n_choices)


def choice_frequencies(pop: Population, config: SimulationConfig,
                       weights: np.ndarray | None = None) -> ChoiceFrequencyTable:
    hist = label_histograms(pop, config.num_labels, weights)
    counts = pop.label_counts(config.num_labels)
    p = np.zeros_like(hist)
    nonempty = counts > 0
    p[nonempty] = hist[nonempty] / counts[nonempty, None, None]
    return ChoiceFrequencyTable(p=p, labeled_count=counts)


def _normalized_entropy(p: np.ndarray, n_choices: int) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return np.clip(-terms.sum(axis=-1) / math.log(n_choices), 0.0, 1.0)


def per_label_sw(freq: ChoiceFrequencyTable) -> np.ndarray:
    """SW index of each label averaged over issues; NaN for empty labels."""
    h = _normalized_entropy(freq.p, freq.num_choices).mean(axis=1)
    return np.where(freq.present, h, np.nan)


def sw_index(freq: ChoiceFrequencyTable) -> float:
    """Normalized Shannon-Wiener diversity averaged over nonempty labels and issues."""
    if not freq.present.any():
        raise UndefinedMetric("sw_index needs at least one nonempty label")
    h = _normalized_entropy(freq.p[freq.present], freq.num_choices)
    return float(np.clip(h.mean(), 0.0, 1.0))


def cosine_index(freq: ChoiceFrequencyTable) -> float:
    """Mean cosine similarity over unordered pairs of nonempty labels, then over issues."""
    rows = freq.p[freq.present]
    m = rows.shape[0]
    if m < 2:
        raise UndefinedMetric("cosine_index needs at least two nonempty labels")
    # (issues, labels, choices)
    v = np.transpose(rows, (1, 0, 2))
    unit = v / np.linalg.norm(v, axis=2, keepdims=True)
    gram = unit @ np.transpose(unit, (0, 2, 1))
    iu = np.triu_indices(m, k=1)
    per_issue = gram[:, iu[0], iu[1]].mean(axis=1)
    return float(np.clip(per_issue.mean(), 0.0, 1.0))


def mutual_information_all(pop: Population, num_labels: int,
                           weights: np.ndarray | None = None) -> np.ndarray:
    """I(label; preferred choice) in nats for every issue, among labeled agents."""
    hist = label_histograms(pop, num_labels, weights)
    n_labeled = int((pop.labels >= 0).sum())
    if n_labeled == 0:
        raise UndefinedMetric("mutual_information needs at least one labeled agent")
    joint = hist / n_labeled  # (labels, issues, choices)
    p_label = joint.sum(axis=2, keepdims=True)
    p_choice = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint / (p_label * p_choice)), 0.0)
    mi = terms.sum(axis=(0, 2))
    bound = min(math.log(num_labels), math.log(hist.shape[2]))
    return np.clip(mi, 0.0, bound)


def mutual_information(pop: Population, issue: int, num_labels: int | None = None) -> float:
    if num_labels is None:
        num_labels = int(pop.labels.max()) + 1 if (pop.labels >= 0).any() else 1
    return float(mutual_information_all(pop, num_labels)[issue])


def activation_barriers(strengths: np.ndarray) -> np.ndarray:
    """Unit inputs needed to flip the preferred choice, along the last axis."""
    top2 = np.sort(strengths, axis=-1)[..., -2:]
    return (np.floor(top2[..., 1] - top2[..., 0]) + 1).astype(np.int64)


def activation_barrier(agent: AgentState, issue: int) -> int:
    return int(activation_barriers(np.asarray(agent.strengths[issue]))[()])


def relative_entropies(strengths: np.ndarray) -> np.ndarray:
    """Normalized entropy of each linearly normalized strength row (1 for all-zero rows)."""
    total = strengths.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(total > 0, strengths / total, 1.0 / strengths.shape[-1])
    return _normalized_entropy(q, strengths.shape[-1])


def agent_relative_entropy(agent: AgentState, issue: int, config: SimulationConfig | None = None) -> float:
    return float(relative_entropies(np.asarray(agent.strengths[issue], dtype=np.float64))[()])


@dataclass
class WindowCounters:
    """Counters accumulated from step reports between two records."""

    choice_changes: int = 0
    label_switches: int = 0

    def add(self, steps: np.ndarray) -> None:
        from .engine import COL_ADOPTIONS, COL_CHANGES, COL_DROPS

        if len(steps):
            self.choice_changes += int(steps[:, COL_CHANGES].sum())
            self.label_switches += int(steps[:, COL_DROPS].sum() + steps[:, COL_ADOPTIONS].sum())

    def reset(self) -> None:
        self.choice_changes = 0
        self.label_switches = 0


@dataclass
class MetricsRecord:
    timestep: int
    sw_index: float | None
    cosine_index: float | None
    per_label_sw: list[float | None]
    n_choice_changes_window: int
    n_label_switches_window: int
    mutual_information: float | None
    mi_per_issue: list[float] | None
    ab_min: int
    ab_q1: float
    ab_median: float
    ab_q3: float
    ab_max: int
    agent_entropy_mean: float
    n_labeled: int
    n_unlabeled: int


def collect(pop: Population, config: SimulationConfig, counters: WindowCounters) -> MetricsRecord:
    """Assemble one record for the current state and reset ``counters``.

    Undefined metrics (no nonempty label, fewer than two labels, ...) are
    stored as ``None``.
    """
    weights = preference_weights(pop.strengths)
    freq = choice_frequencies(pop, config, weights)
    try:
        sw = sw_index(freq)
    except UndefinedMetric:
        sw = None
    try:
        cos = cosine_index(freq)
    except UndefinedMetric:
        cos = None
    try:
        mi_issues = mutual_information_all(pop, config.num_labels, weights)
        mi = float(mi_issues.mean())
        mi_list = [float(x) for x in mi_issues]
    except UndefinedMetric:
        mi, mi_list = None, None
    ab = activation_barriers(pop.strengths).ravel()
    q1, med, q3 = np.percentile(ab, [25, 50, 75])
    labeled = int((pop.labels >= 0).sum())
    record = MetricsRecord(
        timestep=pop.timestep,
        sw_index=sw,
        cosine_index=cos,
        per_label_sw=[None if np.isnan(x) else float(x) for x in per_label_sw(freq)],
        n_choice_changes_window=counters.choice_changes,
        n_label_switches_window=counters.label_switches,
        mutual_information=mi,
        mi_per_issue=mi_list,
        ab_min=int(ab.min()),
        ab_q1=float(q1),
        ab_median=float(med),
        ab_q3=float(q3),
        ab_max=int(ab.max()),
        agent_entropy_mean=float(relative_entropies(pop.strengths).mean()),
        n_labeled=labeled,
        n_unlabeled=pop.size - labeled,
    )
    counters.reset()
    return record


def check_record_bounds(record: MetricsRecord, config: SimulationConfig) -> list[str]:
    """Return descriptions of any bound violated by ``record``."""
    bad = []
    for name in ("sw_index", "cosine_index", "agent_entropy_mean"):
        v = getattr(record, name)
        if v is not None and not 0.0 <= v <= 1.0:
            bad.append(f"{name}={v} outside [0, 1]")
    mi_cap = min(math.log(config.num_labels), math.log(config.num_choices)) + 1e-12
    for v in record.mi_per_issue or []:
        if not 0.0 <= v <= mi_cap:
            bad.append(f"mutual information {v} outside [0, {mi_cap}]")
    if record.n_choice_changes_window < 0 or record.n_label_switches_window < 0:
        bad.append("negative window counter")
    return bad

