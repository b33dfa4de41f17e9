"""Kalman-Bucy type filters for Lévy-driven linear observations.

Every variant runs the same Euler scheme

    Yhat_{k+1} = Yhat_k + A_k Yhat_k dt + K_k (dZ_k - C_k Yhat_k dt),
    K_k = S_k C_k^T G_k^T Xi_k G_k,

and differs only in the weighting ``Xi`` (see :mod:`levy_kalman.riccati`)
and hence in ``S``.  The linear-degenerate filter has ``K = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, ModelError
from .levy_core import PathGrid
from .levy_core.sampling import write_csv
from .linear_sde import gain_normalizer, observation_drift, simulate_coupled_observations, simulate_system
from .riccati import phi_limit, solve_riccati, standard_normalization
from .levy_core.sampling import l1_table


@dataclass(eq=False)
class FilterRun:
    """Output of :func:`run_filter` for a batch of paths.

    ``estimate`` has shape (paths, steps + 1, d1), ``innovations`` holds
    the cumulative innovation process ``N`` with shape (paths, steps + 1, d2)
    and ``gains`` the gain matrices ``K(t_k)``.  ``errors`` is ``Y - Yhat``
    when the true state was supplied.
    """

    variant: str
    grid: object
    estimate: np.ndarray
    gains: np.ndarray
    innovations: np.ndarray
    errors: np.ndarray | None = None
    cutoff: float | None = None
    seed: int | None = None

    @property
    def times(self):
        return self.grid.times

    def path_mse(self):
        """Time-averaged ``|Y - Yhat|^2`` per path over all grid points, ``t = 0`` included."""
        if self.errors is None:
            raise ValueError("no reference state was given to the filter")
        return np.mean(np.sum(self.errors ** 2, axis=2), axis=1)

    def to_csv(self, path, index=0):
        """``t, yhat_1.., n_1..`` for one path (17 significant digits)."""
        d1, d2 = self.estimate.shape[2], self.innovations.shape[2]
        header = ["t"] + [f"yhat_{i + 1}" for i in range(d1)] + [f"n_{j + 1}" for j in range(d2)]
        write_csv(path, header, np.column_stack([self.times, self.estimate[index], self.innovations[index]]))

    def gains_to_csv(self, path):
        """``t, k11, k12, ..`` (row-major)."""
        n, r, c = self.gains.shape
        header = ["t"] + [f"k{i + 1}{j + 1}" for i in range(r) for j in range(c)]
        write_csv(path, header, np.column_stack([self.times, self.gains.reshape(n, -1)]))


def _values(obj):
    return obj.values if isinstance(obj, PathGrid) else np.asarray(obj)


def innovation_increments(model, estimate, observations):
    """``dN_k = dZ_k - C(t_k) Yhat_k dt`` with the same arithmetic as the observation drift."""
    return observations.increments - observation_drift(model, _values(estimate), observations.grid)


def innovations(estimate, observations, model):
    """Cumulative innovation process ``N(t) = Z(t) - int_0^t C Yhat ds`` on the grid."""
    est = estimate.estimate if isinstance(estimate, FilterRun) else _values(estimate)
    dN = innovation_increments(model, est, observations)
    out = np.zeros((dN.shape[0], dN.shape[1] + 1, dN.shape[2]))
    np.cumsum(dN, axis=1, out=out[:, 1:])
    return out


def normalized_innovations(model, innovation_path, grid):
    """``R(t) = int_0^t G(s) dN(s)`` from cumulative innovations."""
    dN = np.diff(innovation_path, axis=1)
    G = np.stack([gain_normalizer(model, t) for t in grid.times[:-1]]) if not model.D.is_constant \
        else np.broadcast_to(gain_normalizer(model, 0.0), (grid.n_steps, model.d2, model.d2))
    dR = np.einsum("kij,pkj->pki", G, dN)
    out = np.zeros_like(innovation_path)
    np.cumsum(dR, axis=1, out=out[:, 1:])
    return out


def filter_gains(model, riccati, normalization):
    """``K(t_k) = S(t_k) C^T G^T Xi G`` on the Riccati grid.

    Where the weighting is singular at ``t = 0`` the first gain uses
    ``Xi(dt)``.
    """
    times = riccati.times
    n = times.size
    K = np.zeros((n, model.d1, model.d2))
    if normalization.is_zero:
        return K
    for k, t in enumerate(times):
        tw = times[1] if (k == 0 and normalization.singular_at_zero) else t
        G = gain_normalizer(model, t)
        GW = G.T @ normalization(tw) @ G
        K[k] = riccati.S[k] @ model.C(t).T @ GW
    return K


def run_filter(model, observations, riccati, normalization, truth=None, seed=None):
    """Run the filter on ``observations`` (a :class:`PathGrid` of ``Z``).

    ``riccati`` must be the solution belonging to ``normalization``.
    ``Yhat(0)`` is ``model.initial_mean``.
    """
    grid = observations.grid
    if riccati.times.size != grid.n_steps + 1 or not np.allclose(riccati.times, grid.times):
        raise GridError("Riccati solution and observations live on different grids")
    if riccati.variant != normalization.kind:
        raise ModelError(f"Riccati variant {riccati.variant!r} does not match {normalization.kind!r}")
    K = filter_gains(model, riccati, normalization)
    A = model.A.on_grid(grid.times)
    C = model.C.on_grid(grid.times)
    dZ = observations.increments
    dt = grid.dt
    n_paths = dZ.shape[0]
    Yhat = np.empty((n_paths, grid.n_steps + 1, model.d1))
    Yhat[:, 0] = model.initial_mean
    N = np.zeros((n_paths, grid.n_steps + 1, model.d2))
    for k in range(grid.n_steps):
        y = Yhat[:, k]
        dN = dZ[:, k] - (y @ C[k].T) * dt
        Yhat[:, k + 1] = y + (y @ A[k].T) * dt + dN @ K[k].T
        N[:, k + 1] = N[:, k] + dN
    errors = None
    if truth is not None:
        if truth.grid != grid:
            raise GridError("true state and observations live on different grids")
        errors = truth.values - Yhat
    return FilterRun(normalization.kind, grid, Yhat, K, N, errors, normalization.cutoff, seed)


def prepare_filter(model, grid, variant="limiting", cutoff=math.inf, convention="intensity", cutoffs=None):
    """Normalisation and Riccati solution for one filter variant."""
    from .riccati import degenerate_normalization

    if variant == "standard":
        norm = standard_normalization(model, cutoff, convention, grid.dt)
    elif variant == "limiting":
        norm = phi_limit(model, cutoffs=cutoffs, convention=convention)
    elif variant == "linear-degenerate":
        norm = degenerate_normalization(model)
    else:
        raise ModelError(f"unknown filter variant {variant!r}")
    return norm, solve_riccati(model, norm, grid)


def filter_convergence_study(model, cutoffs, grid, replicates, seed, convention="intensity", chunk=1000):
    """``E|Yhat_n(T) - Yhat(T)|`` between standard filters on ``Z_n`` and the limiting filter on ``Z``.

    Observations are coupled: ``Z_n`` is ``Z`` with jumps larger than ``n``
    removed.  No analytic bound is reported (the bound column is NaN).
    """
    cutoffs = [float(n) for n in cutoffs]
    lim = prepare_filter(model, grid, "limiting", convention=convention)
    std = {n: prepare_filter(model, grid, "standard", n, convention) for n in cutoffs}
    gaps = np.empty((replicates, len(cutoffs)))
    for lo in range(0, replicates, chunk):
        k = min(chunk, replicates - lo)
        Y = simulate_system(model, grid, seed, k, first_path=lo)
        obs = simulate_coupled_observations(model, Y, seed, [math.inf] + cutoffs, first_path=lo)
        ref = run_filter(model, obs[math.inf], lim[1], lim[0]).estimate[:, -1]
        for j, n in enumerate(cutoffs):
            est = run_filter(model, obs[n], std[n][1], std[n][0]).estimate[:, -1]
            gaps[lo:lo + k, j] = np.linalg.norm(est - ref, axis=1)
    return l1_table(cutoffs, gaps, [math.nan] * len(cutoffs), "E|Yhat_n(T) - Yhat(T)|")
