import json
from pathlib import Path

import numpy as np
import pytest

from hiergrain.bundle import (MANIFEST, METRICS, REGIME, SNAPSHOTS, STEPS, BundleError, read_bundle,
                              read_metrics, simulate_to_bundle, write_metrics)
from hiergrain.cli import PHASE_TABLE, main
from hiergrain.config import SimulationConfig, dump_config
from hiergrain.simulate import run_simulation


def files(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "run.toml"
    path.write_text(dump_config(small_config))
    return path


def test_metrics_round_trip(tmp_path, small_config):
    result = run_simulation(small_config.replace(prob_dropping_label=0.5, num_labels=6))
    write_metrics(tmp_path / METRICS, result.records, result.config)
    assert read_metrics(tmp_path / METRICS) == result.records


def test_bundle_contents(tmp_path, small_config):
    report = simulate_to_bundle(small_config, tmp_path / "run", full_snapshots=True)
    b = read_bundle(tmp_path / "run")
    assert b.regime == report
    assert b.manifest.config == small_config
    assert b.steps.shape == (small_config.max_timesteps, 6)
    assert len(b.snapshots) == len(b.records) == 5
    assert b.snapshots[0].agents is not None
    assert {p.name for p in (tmp_path / "run").iterdir()} == {MANIFEST, METRICS, SNAPSHOTS, REGIME, STEPS}


def test_refuses_to_overwrite_foreign_directory(tmp_path, small_config):
    (tmp_path / "x").mkdir()
    (tmp_path / "x" / "keep.txt").write_text("mine")
    with pytest.raises(BundleError):
        simulate_to_bundle(small_config, tmp_path / "x")


def test_simulate_byte_identical(tmp_path, config_file):
    assert main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "b")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_simulate_seed_override_changes_output(tmp_path, config_file):
    main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(config_file), "--seed", "99", "--out", str(tmp_path / "b")])
    assert files(tmp_path / "a")[METRICS] != files(tmp_path / "b")[METRICS]
    assert read_bundle(tmp_path / "b").manifest.config.seed == 99


def test_zero_timesteps_gives_single_record(tmp_path, config_file):
    assert main(["simulate", "--config", str(config_file), "--max-timesteps", "0",
                 "--out", str(tmp_path / "z")]) == 0
    b = read_bundle(tmp_path / "z")
    assert [r.timestep for r in b.records] == [0]
    assert b.steps.shape[0] == 0


def test_default_out_uses_environment(tmp_path, config_file, monkeypatch):
    monkeypatch.setenv("HIERGRAIN_OUT", str(tmp_path / "env"))
    assert main(["simulate", "--config", str(config_file)]) == 0
    assert (tmp_path / "env" / "run" / MANIFEST).exists()


def test_invalid_config_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("pop-size = 0\nprob-dropping-label = 2.0\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "pop_size" in err and "probability out of range" in err


def test_missing_config_exit_1(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.toml")]) == 1


def test_usage_error_exit_1():
    assert main(["simulate"]) == 1
    assert main(["frobnicate"]) == 1


def test_malformed_grid_names_key(tmp_path, capsys):
    p = tmp_path / "g.toml"
    p.write_text("num-labels = []\n")
    assert main(["sweep", "--grid", str(p), "--out", str(tmp_path / "s")]) == 1
    assert "num-labels" in capsys.readouterr().err


def test_analyze_reproduces_regime(tmp_path, small_config):
    for rep in range(2):
        simulate_to_bundle(small_config.replace(seed=rep), tmp_path / "runs" / f"rep_{rep}",
                           replicate_index=rep)
    assert main(["analyze", str(tmp_path / "runs"), "--out", str(tmp_path / "re")]) == 0
    for rep in range(2):
        assert (tmp_path / "re" / f"rep_{rep}" / REGIME).read_bytes() == \
            (tmp_path / "runs" / f"rep_{rep}" / REGIME).read_bytes()
    assert (tmp_path / "re" / PHASE_TABLE).exists()


def test_analyze_with_new_thresholds(tmp_path, small_config):
    simulate_to_bundle(small_config, tmp_path / "runs" / "r")
    t = tmp_path / "t.toml"
    t.write_text("eps-sw = 1.0\n")
    assert main(["analyze", str(tmp_path / "runs"), "--thresholds", str(t), "--out", str(tmp_path / "re")]) == 0
    report = json.loads((tmp_path / "re" / "r" / REGIME).read_text())
    assert report["thresholds_used"]["eps_sw"] == 1.0
    assert report["t_local_align"] == 0


def test_analyze_empty_directory(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["analyze", str(tmp_path / "empty")]) == 0
    assert "no readable bundles" in capsys.readouterr().err


def test_analyze_skips_corrupt_bundle(tmp_path, small_config, capsys):
    simulate_to_bundle(small_config, tmp_path / "runs" / "good")
    simulate_to_bundle(small_config, tmp_path / "runs" / "bad")
    (tmp_path / "runs" / "bad" / METRICS).write_text("")
    assert main(["analyze", str(tmp_path / "runs"), "--out", str(tmp_path / "re")]) == 0
    assert "bad" in capsys.readouterr().err


def test_plot_on_corrupt_metrics_fails(tmp_path, small_config):
    simulate_to_bundle(small_config, tmp_path / "r")
    (tmp_path / "r" / METRICS).write_text("")
    assert main(["plot", str(tmp_path / "r"), "--out", str(tmp_path / "p")]) != 0


def test_plot_writes_specs(tmp_path, small_config):
    simulate_to_bundle(small_config, tmp_path / "r", full_snapshots=True)
    assert main(["plot", str(tmp_path / "r" / METRICS), "--timestep", "200", "--no-svg",
                 "--out", str(tmp_path / "p")]) == 0
    names = {p.name for p in (tmp_path / "p").iterdir()}
    assert {"trajectories.vl.json", "ab_quartiles.vl.json", "histograms_t200.vl.json",
            "strengths_t200.vl.json"} <= names
    spec = json.loads((tmp_path / "p" / "trajectories.vl.json").read_text())
    assert spec["layer"][0]["data"]["values"]


def test_plot_renders_svg(tmp_path, small_config):
    pytest.importorskip("matplotlib")
    simulate_to_bundle(small_config, tmp_path / "r")
    assert main(["plot", str(tmp_path / "r"), "--timestep", "0", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "trajectories.svg").exists()
    assert (tmp_path / "p" / "histograms_t0.svg").exists()


def test_plot_unknown_timestep_exit_1(tmp_path, small_config, capsys):
    simulate_to_bundle(small_config, tmp_path / "r")
    assert main(["plot", str(tmp_path / "r"), "--timestep", "123", "--out", str(tmp_path / "p")]) == 1
    assert "available" in capsys.readouterr().err
    assert not (tmp_path / "p").exists()


def test_sweep_cli(tmp_path):
    g = tmp_path / "g.toml"
    g.write_text("replicates = 2\npop-size = 30\nnum-issues = 2\nmax-timesteps = 200\n"
                 "snapshot-interval = 100\nprob-dropping-label = [0.0, 0.01]\n")
    assert main(["sweep", "--grid", str(g), "--out", str(tmp_path / "s"), "--jobs", "2"]) == 0
    assert len(list((tmp_path / "s").rglob(MANIFEST))) == 4
