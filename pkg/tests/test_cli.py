import filecmp
import math

import numpy as np
import pytest
import yaml

from levy_kalman.cli import main
from levy_kalman.config import load_config, parse_config
from levy_kalman.errors import ConfigError
from levy_kalman.levy_core import read_csv

SMALL = {
    "schema_version": 1,
    "seed": 11,
    "grid": {"T": 2.0, "dt": 0.01},
    "filter": {"n_paths": 2, "export_gains": True},
    "converge": {"levy_replicates": 200, "filter_replicates": 100, "filter_cutoffs": [10.0, 100.0]},
    "bench": {"replicates": 200, "alphas": [1.5], "T": 2.0},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors


@pytest.mark.parametrize("command", ["simulate", "riccati", "filter", "bench", "converge"])
def test_runs_are_byte_identical(command, config_file, tmp_path):
    before = config_file.read_bytes()
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--config", str(config_file), "--out", str(a)]) == 0
    assert main([command, "--config", str(config_file), "--out", str(b)]) == 0
    assert same_tree(a, b)
    assert config_file.read_bytes() == before
    assert (a / "resolved_config.yaml").exists()


def test_resolved_config_round_trip(config_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["filter", "--config", str(config_file), "--out", str(a)]) == 0
    assert main(["filter", "--config", str(a / "resolved_config.yaml"), "--out", str(b)]) == 0
    assert same_tree(a, b)


def test_riccati_degenerate_csv_matches_closed_form(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"riccati": {"variant": "linear-degenerate"}}))
    assert main(["riccati", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    header, data = read_csv(tmp_path / "o" / "riccati.csv")
    assert header == ["t", "s11"]
    assert np.abs(data[:, 1] - (1 - np.exp(-2 * data[:, 0])) / 2).max() < 1e-8


def test_seed_override_changes_outputs(config_file, tmp_path):
    main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "b"), "--seed", "12"])
    assert (tmp_path / "a" / "system.csv").read_bytes() != (tmp_path / "b" / "system.csv").read_bytes()
    assert "seed: 12" in (tmp_path / "b" / "resolved_config.yaml").read_text()


def test_converge_writes_all_tables(config_file, tmp_path):
    out = tmp_path / "o"
    assert main(["converge", "--config", str(config_file), "--out", str(out)]) == 0
    for stem in ("levy_l1", "observation_l1", "upsilon", "riccati_convergence", "filter_convergence"):
        assert (out / f"{stem}.csv").exists() and (out / f"{stem}.md").exists()


def test_schema_violation_names_the_field(tmp_path, caplog):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"grid": {"T": 1.0, "step": 0.1}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "grid.step" in caplog.text


def test_config_errors_carry_paths():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config({"schema_version": 2})
    with pytest.raises(ConfigError, match=r"model\.observation_noise\.jumps\[0\]"):
        parse_config({"model": {"observation_noise": {"dimension": 1, "jumps": [{"kind": "gamma"}]}}})
    with pytest.raises(ConfigError, match="bench.statistic"):
        parse_config({"bench": {"statistic": "max"}})
    with pytest.raises(ConfigError, match="widgets"):
        parse_config({"widgets": {}})


def test_numerical_failure_exit_status(tmp_path, caplog):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"riccati": {"variant": "standard"}}))
    # untruncated stable noise has no finite covariance for the standard weighting
    assert main(["riccati", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "InfiniteVarianceError" in caplog.text


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["plot", "--out", "x"])
    assert info.value.code == 2


def test_defaults_load_without_a_file():
    cfg = load_config(None, seed=5, replicates=300)
    assert cfg.seed == 5 and cfg.bench.root_seed == 5 and cfg.bench.replicates == 300
    assert math.isinf(cfg.filter["cutoff"])
