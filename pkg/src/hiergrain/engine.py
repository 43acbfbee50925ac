"""One-timestep dynamics: label migration, then one interaction per receiver.

The compiled kernels here are the only implementation of the update
rules; the Python-level helpers (``label_phase``, ``interaction``, ...)
call the same kernels on a single agent so tests exercise the code path
that the hot loop runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SimulationConfig
from .population import NO_LABEL, AgentState, Population
from .rng import Stream, randbelow, uniform

# Interaction kinds, also used as indices into the per-step counter row.
NONE = 0
SIMPLE = 1
SAME_LABEL = 2

# Columns of the per-step counter array filled by the kernels.
COL_DROPS = 0
COL_ADOPTIONS = 1
COL_CHANGES = 2
COL_EFFECTIVE = 3
COL_SIMPLE = 4
COL_SAME = 5
N_COUNTERS = 6


class NoPartner(Exception):
    """Raised when a receiver has nobody to interact with (pop_size < 2)."""


@dataclass(frozen=True)
class StepReport:
    timestep: int
    n_label_drops: int
    n_label_adoptions: int
    n_preferred_choice_changes: int
    n_interactions_effective: int
    n_simple: int = 0
    n_same_label: int = 0

    def added_mass(self, config: SimulationConfig) -> float:
        """Strength mass the interactions of this step declare they added."""
        return self.n_simple + self.n_same_label * config.issues_per_discourse * config.strength_of_influence

    @classmethod
    def from_row(cls, timestep: int, row) -> "StepReport":
        return cls(int(timestep), *(int(v) for v in row[:N_COUNTERS]))


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _express(row, state):
    n = row.shape[0]
    best = 0
    top = row[0]
    ties = 1
    for c in range(1, n):
        v = row[c]
        if v > top:
            top = v
            best = c
            ties = 1
        elif v == top:
            ties += 1
    if ties == 1:
        return best
    k = randbelow(state, ties)
    for c in range(n):
        if row[c] == top:
            if k == 0:
                return c
            k -= 1
    return best


@njit(cache=True)
def _reinforce(row, choice, delta):
    """Add ``delta`` to one choice; return 1 if the set of maximal choices changed."""
    top = row[0]
    ties = 1
    for c in range(1, row.shape[0]):
        v = row[c]
        if v > top:
            top = v
            ties = 1
        elif v == top:
            ties += 1
    old = row[choice]
    row[choice] = old + delta
    if old == top:
        return 1 if ties > 1 else 0
    return 1 if old + delta >= top else 0


@njit(cache=True)
def _label_update(label, p_drop, p_adopt, num_labels, state):
    u = uniform(state)
    if label >= 0:
        if u < p_drop:
            return -1
        return label
    if u < p_adopt:
        return randbelow(state, num_labels)
    return label


@njit(cache=True)
def _pick_partner(receiver, n, state):
    j = randbelow(state, n - 1)
    if j >= receiver:
        j += 1
    return j


@njit(cache=True)
def _interact(strengths, labels, receiver, sender, mid, soi, ignoring, state, scratch):
    """Apply one sender->receiver interaction; return (kind, preferred-choice changes)."""
    n_issues = strengths.shape[1]
    lr = labels[receiver]
    ls = labels[sender]
    changes = 0
    if lr >= 0 and lr == ls:
        if mid >= n_issues:
            for i in range(n_issues):
                c = _express(strengths[sender, i], state)
                changes += _reinforce(strengths[receiver, i], c, soi)
        else:
            # partial Fisher-Yates over the issue indices
            for i in range(n_issues):
                scratch[i] = i
            for t in range(mid):
                r = t + randbelow(state, n_issues - t)
                tmp = scratch[t]
                scratch[t] = scratch[r]
                scratch[r] = tmp
                i = scratch[t]
                c = _express(strengths[sender, i], state)
                changes += _reinforce(strengths[receiver, i], c, soi)
        return SAME_LABEL, changes
    if ignoring and lr >= 0 and ls >= 0:
        return NONE, 0
    i = randbelow(state, n_issues)
    c = _express(strengths[sender, i], state)
    changes += _reinforce(strengths[receiver, i], c, 1.0)
    return SIMPLE, changes


@njit(cache=True)
def _step(strengths, labels, num_labels, mid, soi, ignoring, p_drop, p_adopt, state, scratch, counters):
    n = labels.shape[0]
    for a in range(n):
        before = labels[a]
        after = _label_update(before, p_drop, p_adopt, num_labels, state)
        if after != before:
            labels[a] = after
            if before >= 0:
                counters[COL_DROPS] += 1
            else:
                counters[COL_ADOPTIONS] += 1
    if n < 2:
        return
    for r in range(n):
        s = _pick_partner(r, n, state)
        kind, changes = _interact(strengths, labels, r, s, mid, soi, ignoring, state, scratch)
        counters[COL_CHANGES] += changes
        if kind != NONE:
            counters[COL_EFFECTIVE] += 1
            if kind == SIMPLE:
                counters[COL_SIMPLE] += 1
            else:
                counters[COL_SAME] += 1


@njit(cache=True)
def _run_steps(n_steps, strengths, labels, num_labels, mid, soi, ignoring, p_drop, p_adopt, state, out):
    scratch = np.empty(strengths.shape[1], dtype=np.int64)
    for t in range(n_steps):
        _step(strengths, labels, num_labels, mid, soi, ignoring, p_drop, p_adopt, state, scratch, out[t])


# --------------------------------------------------------------------------
# Python-level API


def _kernel_args(config: SimulationConfig):
    return (
        config.num_labels,
        config.issues_per_discourse,
        float(config.strength_of_influence),
        bool(config.ignoring),
        float(config.prob_dropping_label),
        float(config.prob_adopting_label),
    )


def run_steps(pop: Population, config: SimulationConfig, rng: Stream, n_steps: int) -> np.ndarray:
    """Advance ``pop`` by ``n_steps`` timesteps in place.

    Returns the int64 counter array of shape (n_steps, N_COUNTERS); row k
    describes timestep ``pop.timestep_before + k + 1``.
    """
    out = np.zeros((n_steps, N_COUNTERS), dtype=np.int64)
    if n_steps > 0:
        _run_steps(n_steps, pop.strengths, pop.labels, *_kernel_args(config), rng.state, out)
        pop.timestep += n_steps
    return out


def step(pop: Population, config: SimulationConfig, rng: Stream) -> StepReport:
    """Advance ``pop`` by one timestep and report what happened."""
    row = run_steps(pop, config, rng, 1)[0]
    return StepReport.from_row(pop.timestep, row)


def label_phase(agent: AgentState, config: SimulationConfig, rng: Stream) -> AgentState:
    label = NO_LABEL if agent.label is None else agent.label
    new = int(_label_update(label, float(config.prob_dropping_label),
                            float(config.prob_adopting_label), config.num_labels, rng.state))
    agent.label = None if new == NO_LABEL else new
    return agent


def select_partner(receiver_id: int, pop: Population, rng: Stream) -> int:
    if pop.size < 2:
        raise NoPartner(f"population of {pop.size} has no partner for agent {receiver_id}")
    return int(_pick_partner(receiver_id, pop.size, rng.state))


def express_preferred(agent: AgentState, issue: int, rng: Stream) -> int:
    """Argmax of the agent's strengths on ``issue``, ties broken uniformly."""
    return int(_express(np.ascontiguousarray(agent.strengths[issue], dtype=np.float64), rng.state))


@dataclass(frozen=True)
class InteractionEffect:
    kind: int
    choice_changes: int
    added_mass: float


def interaction(receiver: AgentState, sender: AgentState, config: SimulationConfig,
                rng: Stream) -> tuple[AgentState, InteractionEffect]:
    """Let ``sender`` speak to ``receiver``; only the receiver is updated."""
    if receiver.agent_id == sender.agent_id:
        raise ValueError("receiver and sender must differ")
    strengths = np.stack([receiver.strengths, sender.strengths]).astype(np.float64)
    labels = np.array([NO_LABEL if a.label is None else a.label for a in (receiver, sender)],
                      dtype=np.int64)
    scratch = np.empty(strengths.shape[1], dtype=np.int64)
    kind, changes = _interact(strengths, labels, 0, 1, config.issues_per_discourse,
                              float(config.strength_of_influence), bool(config.ignoring),
                              rng.state, scratch)
    receiver.strengths[...] = strengths[0]
    mass = {NONE: 0.0, SIMPLE: 1.0,
            SAME_LABEL: config.issues_per_discourse * float(config.strength_of_influence)}[int(kind)]
    return receiver, InteractionEffect(int(kind), int(changes), mass)
