"""Cutoff ladders for the truncated noise, the Riccati solution and the filter."""

import numpy as np

from levy_kalman.filtering import filter_convergence_study
from levy_kalman.levy_core import LevyModel, TimeGrid
from levy_kalman.linear_sde import LinearModel, observation_l1_convergence
from levy_kalman.riccati import riccati_convergence_study


def main():
    grid = TimeGrid(10.0, 0.01)
    model = LinearModel.scalar_ou(LevyModel.stable(1.5))

    obs = observation_l1_convergence(model, [8.0, 16.0, 32.0, 64.0], grid, 5000, seed=1)
    print("E|Z(T) - Z_n(T)| against the tail bound")
    for n, e, b in zip([8, 16, 32, 64], obs.empirical, obs.bound):
        print(f"  n={n:>3}  empirical {e:.4f}  bound {b:.4f}")
    print(f"  slope {obs.loglog_slope():.3f}")

    study = riccati_convergence_study(model, [1e1, 1e2, 1e3, 1e4, 1e5], grid)
    print("sup_t ||S_n(t) - S_inf(t)||")
    for n, g in study.rows():
        print(f"  n={n:>8.0f}  {g:.3e}")
    print(f"  slope {study.loglog_slope():.3f}, worst lemma ratio {study.lemma_ratio:.6f}")

    table = filter_convergence_study(model, [1e1, 1e2, 1e3, 1e4], grid, 500, seed=2)
    print("E|Yhat_n(T) - Yhat(T)|")
    for n, e in zip([1e1, 1e2, 1e3, 1e4], np.asarray(table.empirical)):
        print(f"  n={n:>8.0f}  {e:.4f}")


if __name__ == "__main__":
    main()
