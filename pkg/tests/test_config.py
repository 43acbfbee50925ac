import pytest

from hiergrain.config import (ConfigError, SimulationConfig, config_from_mapping, dump_config,
                              load_config, validate_config)


def test_defaults_are_valid():
    assert validate_config(SimulationConfig()) == SimulationConfig()


def test_all_violations_reported_together():
    bad = SimulationConfig(pop_size=0, num_choices=1, prob_dropping_label=1.5)
    with pytest.raises(ConfigError) as info:
        validate_config(bad)
    text = str(info.value)
    assert "pop_size" in text and "num_choices" in text
    assert "probability out of range" in text
    assert len(info.value.problems) == 3


@pytest.mark.parametrize("field, value", [
    ("num_labels", 0), ("num_issues", 0), ("multi_issue_discourse", 0),
    ("strength_of_influence", 0), ("prob_adopting_label", -0.1), ("max_timesteps", -1),
    ("init_strength_max", -1.0), ("seed", -1), ("pop_size", 2.5), ("ignoring", 1),
])
def test_single_bound(field, value):
    with pytest.raises(ConfigError):
        validate_config(SimulationConfig().replace(**{field: value}))


def test_snapshot_interval_longer_than_run():
    with pytest.raises(ConfigError):
        validate_config(SimulationConfig(max_timesteps=100, snapshot_interval=200))
    validate_config(SimulationConfig(max_timesteps=0, snapshot_interval=200))


def test_mid_clamped_to_issue_count():
    assert SimulationConfig(num_issues=5, multi_issue_discourse=20).issues_per_discourse == 5
    assert SimulationConfig(num_issues=10, multi_issue_discourse=5).issues_per_discourse == 5


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="pop_sise|pop-sise"):
        config_from_mapping({"pop-sise": 10})


def test_file_round_trip(tmp_path):
    cfg = SimulationConfig(num_labels=8, num_issues=1, ignoring=False, prob_dropping_label=0.0001, seed=9)
    path = tmp_path / "c.toml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_malformed_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("pop-size = = 3\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(path)
