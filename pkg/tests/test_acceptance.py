"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import filecmp
import math

import numpy as np
import yaml

from levy_kalman.bench import ExperimentConfig, run_benchmark
from levy_kalman.cli import main
from levy_kalman.errors import LemmaBoundViolation
from levy_kalman.filtering import filter_convergence_study, prepare_filter, run_filter
from levy_kalman.levy_core import LevyModel, PathGrid, SymmetricStable, TimeGrid, empirical_l1_convergence, \
    upsilon_infinity
from levy_kalman.linear_sde import LinearModel, observation_l1_convergence
from levy_kalman.riccati import (
    check_lemma_bound,
    degenerate_normalization,
    riccati_convergence_study,
    solve_riccati,
    standard_normalization,
)

GRID = TimeGrid(10.0, 0.01)
NO_FILTER = {1.1: 0.6601, 1.5: 0.6593, 1.9: 0.6603}


def ou_variance(t):
    return (1 - np.exp(-2 * np.asarray(t))) / 2


def test_criterion_1_no_filter_column(report_line):
    report = run_benchmark(ExperimentConfig(alphas=[1.1, 1.5, 1.9], replicates=10_000, root_seed=20240611))
    med = {a: report.value(a, "linear-degenerate", "median-of-path-MSE") for a in NO_FILTER}
    mean = {a: report.value(a, "linear-degenerate", "mean-of-path-MSE") for a in NO_FILTER}
    rmse = {a: report.value(a, "linear-degenerate", "median-of-path-RMSE")[0] for a in NO_FILTER}
    near_table = all(abs(med[a][0] - NO_FILTER[a]) <= 0.08 for a in NO_FILTER)
    flat = all(abs(med[a][0] - med[b][0]) <= 3 * math.hypot(med[a][1], med[b][1])
               for a in NO_FILTER for b in NO_FILTER if a < b)
    exact = 0.5 - (1 - math.exp(-20)) / 40
    analytic = all(abs(mean[a][0] - exact) <= 3 * mean[a][1] for a in NO_FILTER)
    passed = near_table and flat and analytic
    detail = (f"median path-MSE {[round(med[a][0], 4) for a in NO_FILTER]} vs table {list(NO_FILTER.values())} "
              f"+-0.08: {near_table}; alpha-flat within 3 SE: {flat}; mean path-MSE "
              f"{[round(mean[a][0], 4) for a in NO_FILTER]} vs {exact:.4f} +-3 SE: {analytic}; "
              f"(median path-RMSE {[round(rmse[a], 4) for a in NO_FILTER]}) runtime {report.runtime:.1f}s")
    report_line(1, passed, detail)
    assert passed, detail


def _refined_gaussian_observations(n_paths, fine, seed):
    rng = np.random.default_rng(seed)
    n = int(round(GRID.T / fine))
    dW1 = rng.standard_normal((n_paths, n)) * math.sqrt(fine)
    dW2 = rng.standard_normal((n_paths, n)) * math.sqrt(fine)
    Y = np.zeros((n_paths, n + 1))
    for k in range(n):
        Y[:, k + 1] = Y[:, k] - Y[:, k] * fine + dW1[:, k]
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(Y[:, :-1] * fine + dW2, axis=1)], axis=1)


def _discrete_kalman(dZ, dt):
    F, Q, R = math.exp(-dt), (1 - math.exp(-2 * dt)) / 2, 1.0 / dt
    x, P = np.zeros(dZ.shape[0]), 0.0
    out = [x]
    for k in range(dZ.shape[1]):
        g = F * P / (P + R)
        x = F * x + g * (dZ[:, k] / dt - x)
        P = F * P * F + Q - g * P * F
        out.append(x)
    return np.array(out).T


def test_criterion_2_gaussian_reduction(report_line):
    m = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]))
    fine = 0.0025
    Zf = _refined_gaussian_observations(10, fine, seed=17)
    gaps = {}
    for dt in (0.01, 0.005):
        g = TimeGrid(10.0, dt)
        s = int(round(dt / fine))
        norm, sol = prepare_filter(m, g, "standard")
        est = run_filter(m, PathGrid.from_values(g, Zf[:, ::s, None]), sol, norm).estimate[:, :, 0]
        gaps[dt] = float(np.abs(est - _discrete_kalman(np.diff(Zf[:, ::s], axis=1), dt)).max())
    ratio = gaps[0.01] / gaps[0.005]
    passed = gaps[0.01] <= 5 * 0.01 and 1.7 <= ratio <= 2.3
    report_line(2, passed, f"max gap {gaps[0.01]:.5f} at dt=0.01 (limit 0.05), {gaps[0.005]:.5f} at dt=0.005, "
                           f"ratio {ratio:.3f} (halving: 1.7..2.3)")
    assert passed


def test_criterion_3_riccati_closed_form(report_line):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5))
    sol = solve_riccati(m, degenerate_normalization(m), GRID)
    err = float(np.abs(sol.S[:, 0, 0] - ou_variance(GRID.times)).max())
    passed = err < 1e-8
    report_line(3, passed, f"max |S(t) - (1-exp(-2t))/2| = {err:.3e} (limit 1e-8)")
    assert passed


def test_criterion_4_l1_truncation_convergence(report_line):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5))
    ladder = [8.0, 16.0, 32.0, 64.0]
    obs = observation_l1_convergence(m, ladder, GRID, 20_000, seed=404)
    noise = empirical_l1_convergence(m.observation_noise, ladder, GRID, 20_000, seed=404)
    ok = []
    for table in (noise, obs):
        slope = table.loglog_slope()
        ok.append(table.within_bound(3.0) and abs(slope + 0.5) <= 0.15 and np.all(np.diff(table.empirical) < 0))
    passed = all(ok)
    report_line(4, passed, f"E|Z(T)-Z_n(T)| {np.round(obs.empirical, 3).tolist()} <= bound "
                           f"{np.round(obs.bound, 3).tolist()} (+3 SE): {obs.within_bound()}; slope "
                           f"{obs.loglog_slope():.3f} (target -0.5 +-0.15); noise-only slope {noise.loglog_slope():.3f}")
    assert passed


def test_criterion_5_upsilon_limits(report_line):
    scalar = upsilon_infinity(LevyModel.stable(1.5), [1e2, 1e3, 1e4, 1e5, 1e6])
    mixed_noise = LevyModel(4, np.diag([1.0, 1.0, 0.0, 0.0]),
                            (SymmetricStable(1.5, axis=2), SymmetricStable(1.5, axis=3)))
    mixed = upsilon_infinity(mixed_noise, [1e2, 1e3, 1e4, 1e5, 1e6])
    e1 = float(np.abs(scalar.limit).max())
    e2 = float(np.abs(mixed.limit - np.diag([1.0, 1.0, 0.0, 0.0])).max())
    passed = e1 < 1e-3 and e2 < 1e-3
    report_line(5, passed, f"d=1 stable: |inv Lambda^(1e6)| = {e1:.3e}; mixed example: max error {e2:.3e} "
                           f"(limit 1e-3)")
    assert passed


def test_criterion_6_riccati_ladder(report_line):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5))
    study = riccati_convergence_study(m, [1e1, 1e2, 1e3, 1e4, 1e5], GRID)
    slope = study.loglog_slope()
    decreasing = bool(np.all(np.diff(study.gaps) < 0))
    passed = decreasing and abs(slope - (1.5 - 2.0)) <= 0.2
    report_line(6, passed, f"sup_t ||S_n - S_inf|| {[f'{g:.2e}' for g in study.gaps]}; strictly decreasing: "
                           f"{decreasing}; slope {slope:.3f} (target -0.5 +-0.2)")
    assert passed


def test_criterion_7_filter_ladder(report_line):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5))
    table = filter_convergence_study(m, [1e1, 1e2, 1e3, 1e4], GRID, 2000, seed=707)
    decreasing = bool(np.all(np.diff(table.empirical) < 0))
    top = float(table.empirical[-1])
    passed = decreasing and top < 0.05
    report_line(7, passed, f"E|Yhat_n(T) - Yhat(T)| {np.round(table.empirical, 4).tolist()} over 2000 replicates; "
                           f"strictly decreasing: {decreasing}; top cutoff {top:.4f} (limit 0.05)")
    assert passed


def test_criterion_8_error_matrix_bound(report_line):
    analytic = ou_variance(GRID.times)
    worst = 0.0
    checked = 0
    models = [LinearModel.scalar_ou(LevyModel.stable(a)) for a in (1.1, 1.5, 1.9)]
    models.append(LinearModel.scalar_ou(LevyModel.brownian([[1.0]])))
    failure = ""
    for m in models:
        cutoffs = [1.0, 1e1, 1e2, 1e3, 1e4, 1e5] if m.observation_noise.q_set else [math.inf]
        for n in cutoffs:
            sol = solve_riccati(m, standard_normalization(m, n), GRID)
            try:
                worst = max(worst, check_lemma_bound(sol, m, second_moment=analytic))
            except LemmaBoundViolation as exc:
                failure = str(exc)
            checked += 1
    passed = not failure
    report_line(8, passed, f"{checked} standard Riccati solutions, max ||S_n(t)|| / (d1 E|Y(t)|^2) = {worst:.6f}"
                           + (f"; violation: {failure}" if failure else ""))
    assert passed


def test_criterion_9_determinism(report_line, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(yaml.safe_dump({"schema_version": 1, "seed": 99, "filter": {"n_paths": 2, "export_gains": True}}))
    results = {}
    for command in ("simulate", "riccati", "filter", "bench", "converge"):
        dirs = [tmp_path / f"{command}_{i}" for i in range(2)]
        codes = [main([command, "--config", str(config), "--out", str(d), "--replicates", "1000"]) for d in dirs]
        cmp = filecmp.dircmp(dirs[0], dirs[1])
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], cmp.common_files, shallow=False)
        results[command] = codes == [0, 0] and not (mismatch or errors or cmp.left_only or cmp.right_only)
    passed = all(results.values())
    report_line(9, passed, f"byte-identical outputs per subcommand: {results}")
    assert passed
