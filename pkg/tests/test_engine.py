import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hiergrain.config import SimulationConfig
from hiergrain.engine import (COL_ADOPTIONS, COL_DROPS, COL_SAME, COL_SIMPLE, NONE, SAME_LABEL,
                              SIMPLE, NoPartner, express_preferred, interaction, label_phase,
                              run_steps, select_partner, step)
from hiergrain.population import AgentState, Population, init_population, strength_units
from hiergrain.rng import Stream


def _agent(i, label, rows):
    return AgentState(i, label, np.array(rows, dtype=np.float64))


def test_no_drops_when_pdl_zero():
    cfg = SimulationConfig(pop_size=500, prob_dropping_label=0.0)
    pop = init_population(cfg, Stream(1))
    counts = pop.label_counts(cfg.num_labels).copy()
    out = run_steps(pop, cfg, Stream(2), 50)
    assert out[:, COL_DROPS].sum() == 0 and out[:, COL_ADOPTIONS].sum() == 0
    assert np.array_equal(pop.label_counts(cfg.num_labels), counts)


def test_drop_rate():
    cfg = SimulationConfig(pop_size=2500, prob_dropping_label=0.005)
    pop = init_population(cfg, Stream(1))
    out = run_steps(pop, cfg, Stream(2), 200)
    # early on nearly everyone is labeled: about 12.5 drops per step
    assert 10.0 < out[:20, COL_DROPS].mean() < 15.0


def test_one_agent_population_is_noop():
    cfg = SimulationConfig(pop_size=1, prob_dropping_label=0.0)
    pop = init_population(cfg, Stream(0))
    before = pop.copy()
    report = step(pop, cfg, Stream(1))
    assert report.n_interactions_effective == 0
    assert np.array_equal(pop.strengths, before.strengths)
    assert pop.timestep == 1


def test_select_partner():
    cfg = SimulationConfig(pop_size=2)
    pop2 = init_population(cfg, Stream(0))
    rng = Stream(0)
    assert all(select_partner(0, pop2, rng) == 1 for _ in range(20))
    with pytest.raises(NoPartner):
        select_partner(0, init_population(cfg.replace(pop_size=1), Stream(0)), rng)


def test_select_partner_uniform():
    pop = init_population(SimulationConfig(pop_size=2500, num_issues=1, num_choices=2), Stream(0))
    rng = Stream(4)
    draws = np.array([select_partner(17, pop, rng) for _ in range(250000)])
    assert not (draws == 17).any()
    counts = np.bincount(draws, minlength=2500)
    counts = np.delete(counts, 17)
    mu = 250000 / 2499
    # block counts stay within 4 sigma of their expectation
    blocks = counts[:2490].reshape(-1, 10).sum(axis=1)
    assert np.all(np.abs(blocks - 10 * mu) < 4 * np.sqrt(10 * mu))


def test_express_preferred_argmax():
    agent = _agent(0, 0, [[0.2, 3.1, 1.0]])
    assert express_preferred(agent, 0, Stream(0)) == 1


def test_express_preferred_two_way_tie():
    agent = _agent(0, 0, [[5.0, 5.0, 2.0]])
    rng = Stream(1)
    counts = np.bincount([express_preferred(agent, 0, rng) for _ in range(10000)], minlength=3)
    assert counts[2] == 0
    assert stats.chisquare(counts[:2]).pvalue > 1e-4


def test_express_preferred_all_equal():
    agent = _agent(0, 0, [[1.0] * 4])
    rng = Stream(2)
    counts = np.bincount([express_preferred(agent, 0, rng) for _ in range(8000)], minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-4


def test_same_label_interaction_touches_mid_issues():
    cfg = SimulationConfig(num_issues=5, num_choices=3, multi_issue_discourse=3, strength_of_influence=20)
    rng = Stream(3)
    for _ in range(50):
        sender = _agent(1, 2, np.random.default_rng(0).random((5, 3)))
        receiver = _agent(0, 2, np.zeros((5, 3)))
        receiver, effect = interaction(receiver, sender, cfg, rng)
        assert effect.kind == SAME_LABEL
        assert effect.added_mass == 60
        gained = receiver.strengths.sum(axis=1)
        assert sorted(gained.tolist()) == [0, 0, 20, 20, 20]
        # each touched issue is reinforced on the sender's preferred choice
        for i in np.flatnonzero(gained):
            assert receiver.strengths[i].argmax() == sender.strengths[i].argmax()


def test_ignoring_blocks_cross_label():
    cfg = SimulationConfig(num_issues=2, num_choices=3, ignoring=True)
    receiver = _agent(0, 0, [[1, 2, 3], [3, 2, 1]])
    before = receiver.strengths.copy()
    receiver, effect = interaction(receiver, _agent(1, 1, [[9, 0, 0], [0, 9, 0]]), cfg, Stream(0))
    assert effect.kind == NONE and effect.added_mass == 0
    assert np.array_equal(receiver.strengths, before)


@pytest.mark.parametrize("labels, ignoring", [((0, None), True), ((None, 0), True),
                                              ((None, None), True), ((0, 1), False)])
def test_simple_interaction_adds_one(labels, ignoring):
    cfg = SimulationConfig(num_issues=2, num_choices=3, ignoring=ignoring)
    receiver = _agent(0, labels[0], np.zeros((2, 3)))
    receiver, effect = interaction(receiver, _agent(1, labels[1], [[0, 5, 0], [0, 5, 0]]), cfg, Stream(5))
    assert effect.kind == SIMPLE
    assert receiver.strengths.sum() == 1.0
    assert receiver.strengths[:, 1].sum() == 1.0


def test_interaction_with_self_rejected():
    agent = _agent(0, 0, [[1, 2]])
    with pytest.raises(ValueError):
        interaction(agent, agent, SimulationConfig(num_issues=1, num_choices=2), Stream(0))


def test_label_phase_drop_and_adopt():
    rng = Stream(0)
    cfg = SimulationConfig(prob_dropping_label=1.0, prob_adopting_label=1.0, num_labels=6)
    assert label_phase(_agent(0, 3, [[0, 0]]), cfg, rng).label is None
    labels = [label_phase(_agent(0, None, [[0, 0]]), cfg, rng).label for _ in range(6000)]
    assert None not in labels
    assert stats.chisquare(np.bincount(labels, minlength=6)).pvalue > 1e-4


def test_label_phase_keeps_label_when_pdl_zero():
    cfg = SimulationConfig(prob_dropping_label=0.0)
    rng = Stream(0)
    assert all(label_phase(_agent(0, 2, [[0, 0]]), cfg, rng).label == 2 for _ in range(100))


@given(seed=st.integers(0, 2**32), pdl=st.sampled_from([0.0, 0.01, 0.3]),
       ignoring=st.booleans(), soi=st.integers(1, 20), mid=st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_conservation_and_monotonicity(seed, pdl, ignoring, soi, mid):
    cfg = SimulationConfig(pop_size=40, num_labels=3, num_issues=3, num_choices=3,
                           multi_issue_discourse=mid, strength_of_influence=soi,
                           ignoring=ignoring, prob_dropping_label=pdl, seed=seed)
    pop = init_population(cfg, Stream(seed))
    before = pop.strengths.copy()
    units = strength_units(before)
    out = run_steps(pop, cfg, Stream(seed + 1), 25)
    added = out[:, COL_SIMPLE].sum() + out[:, COL_SAME].sum() * cfg.issues_per_discourse * soi
    assert strength_units(pop.strengths) - units == added * 2**24
    assert np.all(pop.strengths >= before)


def test_run_steps_deterministic(small_config):
    def go():
        pop = init_population(small_config, Stream(1))
        out = run_steps(pop, small_config, Stream(2), 100)
        return pop, out
    (p1, o1), (p2, o2) = go(), go()
    assert p1 == p2 and np.array_equal(o1, o2)


def test_chunked_equals_single_run(small_config):
    a = init_population(small_config, Stream(1))
    b = a.copy()
    rng_a, rng_b = Stream(2), Stream(2)
    oa = run_steps(a, small_config, rng_a, 60)
    ob = np.concatenate([run_steps(b, small_config, rng_b, 25), run_steps(b, small_config, rng_b, 35)])
    assert a == b and np.array_equal(oa, ob)
