"""Agent and population state, plus initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SimulationConfig
from .rng import Stream, randbelow, uniform

NO_LABEL = -1

# Initial strengths sit on a dyadic grid so that every later integer
# increment is exact in float64 (up to 2**29 per cell).
STRENGTH_RESOLUTION_BITS = 24
STRENGTH_QUANTUM = 2.0 ** -STRENGTH_RESOLUTION_BITS


@dataclass
class AgentState:
    """A view of one agent inside a :class:`Population`.

    ``strengths`` is a writable view (num_issues x num_choices) into the
    population array; ``label`` is ``None`` when the agent holds no label.
    """

    agent_id: int
    label: int | None
    strengths: np.ndarray


class Population:
    """All agents of one run, stored as dense arrays.

    ``labels`` is int64 with ``NO_LABEL`` for unlabeled agents and
    ``strengths`` is float64 of shape (pop_size, num_issues, num_choices).
    """

    def __init__(self, labels: np.ndarray, strengths: np.ndarray, timestep: int = 0):
        if labels.shape[0] != strengths.shape[0]:
            raise ValueError("labels and strengths disagree on population size")
        self.labels = np.ascontiguousarray(labels, dtype=np.int64)
        self.strengths = np.ascontiguousarray(strengths, dtype=np.float64)
        self.timestep = int(timestep)

    @property
    def size(self) -> int:
        return self.labels.shape[0]

    @property
    def num_issues(self) -> int:
        return self.strengths.shape[1]

    @property
    def num_choices(self) -> int:
        return self.strengths.shape[2]

    def agent(self, agent_id: int) -> AgentState:
        lab = int(self.labels[agent_id])
        return AgentState(agent_id, None if lab == NO_LABEL else lab, self.strengths[agent_id])

    @property
    def agents(self) -> list[AgentState]:
        return [self.agent(i) for i in range(self.size)]

    def copy(self) -> "Population":
        return Population(self.labels.copy(), self.strengths.copy(), self.timestep)

    def label_counts(self, num_labels: int) -> np.ndarray:
        labeled = self.labels[self.labels >= 0]
        return np.bincount(labeled, minlength=num_labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Population):
            return NotImplemented
        return (
            self.timestep == other.timestep
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.strengths, other.strengths)
        )


@njit(cache=True)
def _init_arrays(state, labels, strengths, num_labels, strength_max, quantum):
    n, n_issues, n_choices = strengths.shape
    cells = strength_max / quantum
    for a in range(n):
        for i in range(n_issues):
            for c in range(n_choices):
                strengths[a, i, c] = np.floor(uniform(state) * cells) * quantum
        labels[a] = randbelow(state, num_labels)


def init_population(config: SimulationConfig, rng: Stream) -> Population:
    """Draw a fresh population at timestep 0.

    Each strength is uniform on [0, init_strength_max] (on a 2**-24 grid)
    and each agent takes a uniformly drawn label. Draw order is agent-major:
    all strengths of agent 0, then its label, then agent 1, and so on.
    """
    labels = np.empty(config.pop_size, dtype=np.int64)
    strengths = np.empty((config.pop_size, config.num_issues, config.num_choices))
    _init_arrays(rng.state, labels, strengths, config.num_labels,
                 float(config.init_strength_max), STRENGTH_QUANTUM)
    return Population(labels, strengths, timestep=0)


def strength_units(strengths: np.ndarray) -> int:
    """Exact total of ``strengths`` in multiples of the initial grid quantum."""
    scaled = np.asarray(strengths, dtype=np.float64) * (1 << STRENGTH_RESOLUTION_BITS)
    as_int = scaled.astype(np.int64)
    if not np.array_equal(as_int, scaled):
        raise ValueError("strengths are off the exact grid")
    return int(as_int.sum(dtype=np.int64))
