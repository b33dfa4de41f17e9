import math

import numpy as np
import pytest

from levy_kalman import bench
from levy_kalman.bench import (
    ExperimentConfig,
    discrete_kalman_filter,
    emit_table,
    median_with_se,
    register_competitor,
    run_benchmark,
    unregister_competitor,
)
from levy_kalman.errors import ConfigError, RegimeError, RegistrationError


@pytest.fixture
def clean_registry():
    before = dict(bench._COMPETITORS)
    yield
    bench._COMPETITORS.clear()
    bench._COMPETITORS.update(before)


def small(**kw):
    base = dict(alphas=[1.5], replicates=300, T=2.0, chunk=100)
    base.update(kw)
    return ExperimentConfig(**base)


def test_defaults_mirror_the_experiment():
    cfg = ExperimentConfig()
    assert (cfg.dt, cfg.T, cfg.mu0, cfg.replicates) == (0.01, 10.0, 0.0, 10_000)
    assert cfg.statistic == "median-of-path-MSE"
    m = cfg.model(1.5)
    assert m.A(0.0)[0, 0] == -1.0 and m.observation_noise.q_set == [0]


def test_config_validation():
    with pytest.raises(RegimeError):
        ExperimentConfig(alphas=[2.0])
    with pytest.raises(ConfigError):
        ExperimentConfig(replicates=10)
    with pytest.raises(ConfigError):
        ExperimentConfig(statistic="mode")


def test_report_is_reproducible_and_chunking_invariant():
    a = run_benchmark(small())
    b = run_benchmark(small(chunk=70, threads=3))
    assert emit_table(a, "csv") == emit_table(b, "csv")
    assert bench.statistics_csv(a) == bench.statistics_csv(b)


def test_median_standard_error_matches_normal_theory():
    x = np.random.default_rng(0).standard_normal(40_000)
    med, se = median_with_se(x)
    theory = math.sqrt(math.pi / 2) / math.sqrt(x.size)
    assert se == pytest.approx(theory, rel=0.1)
    assert abs(med) < 4 * theory


def test_degenerate_mean_statistic_matches_ou_variance():
    cfg = ExperimentConfig(alphas=[1.5], replicates=4000)
    report = run_benchmark(cfg)
    value, se = report.value(1.5, "linear-degenerate", "mean-of-path-MSE")
    exact = 0.5 - (1 - math.exp(-20)) / 40
    assert abs(value - exact) < 3 * se


def test_emit_table_shapes():
    report = run_benchmark(small(variants=[]))
    assert emit_table(report, "csv") == "alpha\n"
    assert emit_table(report).splitlines() == ["| alpha |", "|---|"]
    one = run_benchmark(small())
    lines = emit_table(one, "csv").splitlines()
    assert len(lines) == 2
    cell = lines[1].split(",")[1]
    assert cell.count(".") == 2 and "(" in cell and len(cell.split()[0].split(".")[1]) == 4


def test_duplicate_registration_is_rejected(clean_registry):
    register_competitor("zero", lambda obs, cfg, model: np.zeros((obs.n_paths, obs.grid.n_steps + 1)))
    with pytest.raises(RegistrationError):
        register_competitor("zero", lambda *a: None)
    with pytest.raises(RegistrationError):
        register_competitor("linear-degenerate", lambda *a: None)
    unregister_competitor("zero")
    assert "zero" not in bench.competitors()


def test_competitor_columns(clean_registry):
    from levy_kalman.filtering import prepare_filter, run_filter

    def degenerate_again(obs, cfg, model):
        norm, sol = prepare_filter(model, cfg.grid, "linear-degenerate")
        return run_filter(model, obs, sol, norm).estimate

    register_competitor("degenerate-copy", degenerate_again)
    register_competitor("zero", lambda obs, cfg, model: np.zeros((obs.n_paths, obs.grid.n_steps + 1)))
    report = run_benchmark(small())
    assert report.columns == ["linear-degenerate", "degenerate-copy", "zero"]
    for stat in bench.STATISTICS:
        base = report.value(1.5, "linear-degenerate", stat)
        assert report.value(1.5, "degenerate-copy", stat) == base
        assert report.value(1.5, "zero", stat) == base


def test_naive_estimator_is_worse_for_wild_noise(clean_registry):
    def naive(obs, cfg, model):
        return np.concatenate([np.full((obs.n_paths, 1), cfg.mu0), obs.increments[:, :, 0] / obs.dt], axis=1)

    register_competitor("naive", naive)
    report = run_benchmark(ExperimentConfig(alphas=[1.1], replicates=10_000))
    assert report.value(1.1, "naive") > report.value(1.1, "linear-degenerate")


def test_noiseless_observations_beat_no_filter(clean_registry):
    register_competitor("exact-kalman", lambda obs, cfg, model: discrete_kalman_filter(obs, model, 0.0))
    cfg = ExperimentConfig(alphas=[1.5], replicates=1000, observation_noise="gaussian", observation_scale=0.0)
    report = run_benchmark(cfg)
    filtered = report.value(1.5, "exact-kalman")[0]
    assert filtered < 0.05
    assert filtered < report.value(1.5, "linear-degenerate")[0]
    finer = run_benchmark(ExperimentConfig(alphas=[1.5], replicates=1000, dt=0.005, observation_noise="gaussian",
                                           observation_scale=0.0))
    assert finer.value(1.5, "exact-kalman")[0] < filtered


def test_standard_variant_on_truncated_stable_observations():
    report = run_benchmark(small(variants=["linear-degenerate", "standard"], cutoff=50.0))
    assert report.value(1.5, "standard")[0] < report.value(1.5, "linear-degenerate")[0]
