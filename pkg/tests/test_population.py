import numpy as np

from hiergrain.config import SimulationConfig
from hiergrain.population import STRENGTH_QUANTUM, init_population, strength_units
from hiergrain.rng import Stream


def test_zero_max_gives_zero_strengths():
    pop = init_population(SimulationConfig(pop_size=50, init_strength_max=0.0), Stream(1))
    assert not pop.strengths.any()


def test_strengths_uniform_on_grid():
    cfg = SimulationConfig()
    pop = init_population(cfg, Stream(5))
    s = pop.strengths
    assert s.min() >= 0.0 and s.max() < cfg.init_strength_max
    # mean of U(0, 3) is 1.5 with sd sqrt(0.75) per cell
    sigma = np.sqrt(0.75 / s.size)
    assert abs(s.mean() - 1.5) < 3 * sigma
    assert np.array_equal(np.floor(s / STRENGTH_QUANTUM) * STRENGTH_QUANTUM, s)


def test_labels_balanced_and_all_assigned():
    cfg = SimulationConfig()
    pop = init_population(cfg, Stream(5))
    assert (pop.labels >= 0).all()
    counts = pop.label_counts(cfg.num_labels)
    p = 1 / cfg.num_labels
    sigma = np.sqrt(cfg.pop_size * p * (1 - p))
    assert np.all(np.abs(counts - cfg.pop_size * p) < 4 * sigma)


def test_same_seed_bit_identical():
    cfg = SimulationConfig(pop_size=300)
    assert init_population(cfg, Stream(2)) == init_population(cfg, Stream(2))
    assert init_population(cfg, Stream(2)) != init_population(cfg, Stream(3))


def test_agent_view_is_writable():
    pop = init_population(SimulationConfig(pop_size=4, num_labels=2), Stream(0))
    agent = pop.agent(2)
    agent.strengths[0, 0] += 1.0
    assert pop.strengths[2, 0, 0] == agent.strengths[0, 0]


def test_strength_units_exact():
    pop = init_population(SimulationConfig(pop_size=100), Stream(8))
    before = strength_units(pop.strengths)
    pop.strengths[0, 0, 0] += 20
    assert strength_units(pop.strengths) - before == 20 * 2**24
