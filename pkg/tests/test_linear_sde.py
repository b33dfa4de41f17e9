import math

import numpy as np
import pytest

from levy_kalman.errors import DegeneracyError, GridError, ModelError
from levy_kalman.levy_core import LevyModel, PathGrid, SymmetricStable, TimeGrid
from levy_kalman.linear_sde import (
    LinearModel,
    ScalarFunction,
    TimeMatrixFunction,
    gain_normalizer,
    observation_drift,
    observation_l1_convergence,
    simulate_coupled_observations,
    simulate_observation,
    simulate_system,
)


@pytest.fixture
def grid():
    return TimeGrid(2.0, 0.01)


def test_scalar_functions():
    assert ScalarFunction("exp_decay", 2.0, 0.5)(2.0) == pytest.approx(2.0 * math.exp(-1.0))
    table = ScalarFunction("table", times=[0.0, 1.0, 2.0], values=[1.0, 2.0, 3.0])
    assert table(1.0) == 2.0
    assert table(1.2) == 3.0
    assert table(0.0) == 1.0
    with pytest.raises(ModelError):
        ScalarFunction("sin")


def test_time_matrix_function_variants(tmp_path):
    const = TimeMatrixFunction([[2.0]])
    assert const.is_constant and const.is_scaled
    scaled = TimeMatrixFunction([[2.0]], ScalarFunction("exp_decay", 1.0, 1.0))
    assert not scaled.is_constant and scaled.is_scaled
    assert scaled(1.0)[0, 0] == pytest.approx(2.0 / math.e)
    csv = tmp_path / "d.csv"
    csv.write_text("t,m11\n0,1\n1,2\n")
    tab = TimeMatrixFunction.from_dict({"table": "d.csv", "shape": [1, 1]}, "D", str(tmp_path))
    assert tab(0.5)[0, 0] == 2.0 and not tab.is_scaled
    again = TimeMatrixFunction.from_dict(tab.to_dict(), "D")
    assert np.array_equal(again.table, tab.table)


def test_model_shape_validation():
    brown = LevyModel.brownian([[1.0]])
    with pytest.raises(ModelError):
        LinearModel(A=[[1.0, 0.0]], B=[[1.0]], C=[[1.0]], D=[[1.0]], system_noise=brown, observation_noise=brown)
    with pytest.raises(ModelError, match="square-integrable"):
        LinearModel.scalar_ou(brown, system_noise=LevyModel.stable(1.5))
    with pytest.raises(ModelError, match="exceeds"):
        LinearModel(A=[[1.0]], B=[[1.0]], C=[[1.0], [1.0]], D=np.eye(2), system_noise=brown,
                    observation_noise=LevyModel.brownian(np.eye(2)))


def test_gain_normalizer_is_inverse_square_root():
    D = np.array([[2.0, 1.0], [0.0, 1.0]])
    m = LinearModel(A=-np.eye(2), B=np.eye(2), C=np.eye(2), D=D, system_noise=LevyModel.brownian(np.eye(2)),
                    observation_noise=LevyModel.brownian(np.eye(2)))
    G = gain_normalizer(m, 0.0)
    assert np.allclose(G @ D @ D.T @ G.T, np.eye(2))
    assert np.allclose(G, G.T)


def test_zero_d_is_allowed_until_a_gain_is_needed():
    m = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]), D=0.0)
    with pytest.raises(DegeneracyError):
        gain_normalizer(m, 0.0)
    with pytest.raises(DegeneracyError):
        m.validate_observation_matrix(TimeGrid(1.0, 0.1))


def test_ou_second_moment(grid):
    m = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]), initial_var=0.25, initial_mean=1.0)
    Y = simulate_system(m, grid, 3, n_paths=20_000)
    yT = Y.values[:, -1, 0]
    T = grid.T
    # Euler OU: mean (1 - dt)^N, variance recursion v' = (1 - dt)^2 v + dt
    phi = 1 - grid.dt
    mean = phi ** grid.n_steps
    var = 0.25 * phi ** (2 * grid.n_steps) + grid.dt * (1 - phi ** (2 * grid.n_steps)) / (1 - phi ** 2)
    assert abs(yT.mean() - mean) < 4 * math.sqrt(var / yT.size)
    assert abs(yT.var() - var) < 4 * var * math.sqrt(2 / yT.size)
    assert abs(var - (0.25 * math.exp(-2 * T) + (1 - math.exp(-2 * T)) / 2)) < 0.01


def test_observation_with_zero_c_is_pure_noise(grid):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5), C=0.0)
    Y = simulate_system(m, grid, 1, n_paths=2)
    Z = simulate_observation(m, Y, 1)
    from levy_kalman.levy_core import sample_increments, STREAM_OBSERVATION

    noise = sample_increments(m.observation_noise, grid, 1, 2, stream=STREAM_OBSERVATION)
    assert np.array_equal(Z.increments, noise.increments)


def test_observation_drift_is_left_point(grid):
    m = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]), C=2.0, D=0.0)
    Y = simulate_system(m, grid, 5)
    Z = simulate_observation(m, Y, 5)
    assert np.allclose(Z.increments[0, :, 0], 2.0 * Y.values[0, :-1, 0] * grid.dt, rtol=0, atol=1e-15)
    assert np.array_equal(Z.increments, observation_drift(m, Y.values, grid))


def test_coupled_observations_differ_only_by_large_jumps(grid):
    m = LinearModel.scalar_ou(LevyModel.stable(1.5), D=0.5)
    Y = simulate_system(m, grid, 2, n_paths=50)
    paths = simulate_coupled_observations(m, Y, 2, [math.inf, 5.0])
    gap = paths[math.inf].increments - paths[5.0].increments
    nz = gap[gap != 0]
    assert np.all(np.abs(nz) > 0.5 * 5.0 - 1e-12)


def test_grid_mismatch_is_rejected(grid):
    m = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]))
    Y = simulate_system(m, grid, 1)
    noise = PathGrid(TimeGrid(2.0, 0.02), np.zeros((1, 100, 1)))
    with pytest.raises(GridError):
        simulate_observation(m, Y, 1, noise=noise)


def test_time_varying_d_scales_noise(grid):
    f = ScalarFunction("exp_decay", 1.0, 1.0)
    m = LinearModel(A=[[-1.0]], B=[[1.0]], C=[[0.0]], D=TimeMatrixFunction([[1.0]], f),
                    system_noise=LevyModel.brownian([[1.0]]), observation_noise=LevyModel.brownian([[1.0]]))
    Y = simulate_system(m, grid, 0, n_paths=4000)
    Z = simulate_observation(m, Y, 0)
    target = sum(math.exp(-2 * t) for t in grid.times[:-1]) * grid.dt
    zT = Z.values[:, -1, 0]
    assert abs(zT.var() - target) < 4 * target * math.sqrt(2 / zT.size)


def test_multidimensional_mixed_observation():
    noise = LevyModel(2, np.diag([1.0, 0.0]), (SymmetricStable(1.5, axis=1),))
    m = LinearModel(A=-np.eye(2), B=np.eye(2), C=np.eye(2), D=np.eye(2),
                    system_noise=LevyModel.brownian(np.eye(2)), observation_noise=noise)
    g = TimeGrid(1.0, 0.01)
    Y = simulate_system(m, g, 4, n_paths=3)
    Z = simulate_observation(m, Y, 4)
    assert Z.values.shape == (3, 101, 2)


def test_observation_l1_bound_uses_operator_norm_of_d():
    m = LinearModel.scalar_ou(LevyModel.stable(1.5), D=2.0)
    table = observation_l1_convergence(m, [4.0, 16.0], TimeGrid(1.0, 0.01), 1000, 3)
    assert table.bound[0] == pytest.approx(2.0 * 2.0 * m.observation_noise.tail_first_moment(4.0))
    assert table.within_bound()
