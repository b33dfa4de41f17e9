"""With Brownian observation noise the standard filter is the Kalman-Bucy filter.

Compares it with an exact discrete-time Kalman filter on the same data and
shows the gap halving with the step.
"""

import math

import numpy as np

from levy_kalman.filtering import prepare_filter, run_filter
from levy_kalman.levy_core import LevyModel, PathGrid, TimeGrid
from levy_kalman.linear_sde import LinearModel


def fine_observations(n_paths, fine, T, seed):
    rng = np.random.default_rng(seed)
    n = int(round(T / fine))
    dW = rng.standard_normal((2, n_paths, n)) * math.sqrt(fine)
    Y = np.zeros((n_paths, n + 1))
    for k in range(n):
        Y[:, k + 1] = Y[:, k] * (1 - fine) + dW[0, :, k]
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(Y[:, :-1] * fine + dW[1], axis=1)], axis=1)


def discrete_kalman(dZ, dt):
    F, Q, R = math.exp(-dt), (1 - math.exp(-2 * dt)) / 2, 1.0 / dt
    x, P, out = np.zeros(dZ.shape[0]), 0.0, []
    out.append(x)
    for k in range(dZ.shape[1]):
        g = F * P / (P + R)
        x = F * x + g * (dZ[:, k] / dt - x)
        P = F * P * F + Q - g * P * F
        out.append(x)
    return np.array(out).T


def main():
    model = LinearModel.scalar_ou(LevyModel.brownian([[1.0]]))
    fine, T = 0.0025, 10.0
    Zf = fine_observations(5, fine, T, seed=0)
    for dt in (0.02, 0.01, 0.005):
        grid = TimeGrid(T, dt)
        step = int(round(dt / fine))
        norm, sol = prepare_filter(model, grid, "standard")
        est = run_filter(model, PathGrid.from_values(grid, Zf[:, ::step, None]), sol, norm).estimate[:, :, 0]
        gap = np.abs(est - discrete_kalman(np.diff(Zf[:, ::step], axis=1), dt)).max()
        print(f"dt={dt:<6} max gap {gap:.5f}")


if __name__ == "__main__":
    main()
