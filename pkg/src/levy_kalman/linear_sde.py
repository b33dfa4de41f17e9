"""Linear system and observation SDEs driven by Lévy noise.

System      dY = A(t) Y(t-) dt + B(t) dL1(t)
Observation dZ = C(t) Y(t) dt + D(t) dL2(t),   Z(0) = 0

Both are discretised with fixed-step Euler-Maruyama, coefficients taken at
the left end of each step.  On the grid ``Y(t-)`` and ``Y(t)`` coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneracyError, GridError, ModelError
from .levy_core import (
    STREAM_INITIAL,
    STREAM_OBSERVATION,
    STREAM_SYSTEM,
    LevyModel,
    PathGrid,
    replicate_rng,
    sample_increments,
    sample_jump_stream,
)
from .levy_core.sampling import l1_table, read_csv

EIG_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# time-dependent coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """Whitelisted scalar time functions: ``constant``, ``exp_decay`` and ``table``."""

    kind: str = "constant"
    value: float = 1.0
    rate: float = 0.0
    times: np.ndarray = None
    values: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("constant", "exp_decay", "table"):
            raise ModelError(f"unknown scalar function {self.kind!r}")
        if self.kind == "table":
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or np.any(np.diff(t) <= 0):
                raise ModelError("table needs increasing times and matching values")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)

    def __call__(self, t):
        if self.kind == "constant":
            return self.value
        if self.kind == "exp_decay":
            return self.value * math.exp(-self.rate * t)
        return float(self.values[_left_index(self.times, t)])

    def to_dict(self):
        if self.kind == "table":
            return {"kind": "table", "times": self.times.tolist(), "values": self.values.tolist()}
        out = {"kind": self.kind, "value": self.value}
        if self.kind == "exp_decay":
            out["rate"] = self.rate
        return out


def _left_index(times, t):
    # left-continuous lookup: a sample at times[k] governs (times[k-1], times[k]]
    return int(np.clip(np.searchsorted(times, t - 1e-12 * max(1.0, abs(t)), side="left"), 0, len(times) - 1))


class TimeMatrixFunction:
    """Matrix coefficient ``t -> M(t)`` on [0, T].

    Three variants: a constant matrix, a constant matrix times a scalar
    function (``D(t) = D f(t)``), or a table of matrices at given times.
    Tables are evaluated as left-continuous step functions; at a table time
    the tabulated matrix itself is returned.
    """

    def __init__(self, matrix=None, scalar=None, times=None, table=None):
        if table is not None:
            self.times = np.asarray(times, dtype=float)
            self.table = np.asarray(table, dtype=float)
            if self.table.ndim != 3 or self.table.shape[0] != self.times.size:
                raise ModelError("matrix table must have shape (len(times), rows, cols)")
            if np.any(np.diff(self.times) <= 0):
                raise ModelError("table times must be strictly increasing")
            self.matrix = None
            self.scalar = None
            self.shape = self.table.shape[1:]
        else:
            m = np.atleast_2d(np.asarray(matrix, dtype=float))
            if m.ndim != 2:
                raise ModelError("coefficient must be a matrix")
            self.matrix = m
            self.scalar = scalar
            self.times = self.table = None
            self.shape = m.shape

    @classmethod
    def coerce(cls, value):
        return value if isinstance(value, cls) else cls(value)

    @property
    def is_constant(self):
        return self.table is None and (self.scalar is None or self.scalar.kind == "constant")

    @property
    def is_scaled(self):
        """True for constant and constant-times-scalar variants."""
        return self.table is None

    def __call__(self, t):
        if self.table is not None:
            return self.table[_left_index(self.times, t)]
        if self.scalar is None:
            return self.matrix
        return self.matrix * self.scalar(t)

    def on_grid(self, times):
        times = np.asarray(times, dtype=float)
        if self.is_constant:
            m = self(0.0)
            return np.broadcast_to(m, (times.size,) + m.shape)
        return np.stack([self(t) for t in times])

    def to_dict(self):
        if self.table is not None:
            return {"times": self.times.tolist(), "table": self.table.tolist()}
        out = {"matrix": self.matrix.tolist()}
        if self.scalar is not None:
            out["scalar"] = self.scalar.to_dict()
        return out

    @classmethod
    def from_dict(cls, data, where, base_dir=None):
        if isinstance(data, (list, int, float)):
            return cls(data)
        if not isinstance(data, dict):
            raise ConfigError(where, "expected a matrix or a mapping")
        if "table" in data:
            table = data["table"]
            if isinstance(table, str):
                # CSV with header: t, m11, m12, ... (row-major), one row per time
                import os

                path = table if base_dir is None or os.path.isabs(table) else os.path.join(base_dir, table)
                _, raw = read_csv(path)
                rows, cols = data.get("shape", [1, raw.shape[1] - 1])
                return cls(times=raw[:, 0], table=raw[:, 1:].reshape(-1, rows, cols))
            return cls(times=data["times"], table=table)
        if "matrix" not in data:
            raise ConfigError(f"{where}.matrix", "required")
        scalar = data.get("scalar")
        if scalar is not None:
            try:
                scalar = ScalarFunction(**{k: v for k, v in scalar.items()})
            except (TypeError, ModelError) as exc:
                raise ConfigError(f"{where}.scalar", str(exc)) from None
        return cls(data["matrix"], scalar=scalar)


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LinearModel:
    """Linear system/observation pair with Lévy driving noises.

    ``system_noise`` must be square-integrable; ``observation_noise`` only
    needs a finite mean.  The observation matrix ``D(t) D(t)^T`` is checked
    for invertibility on a grid when a gain normaliser is first needed, so
    that noiseless observation models (D = 0) can still be simulated.
    """

    A: TimeMatrixFunction
    B: TimeMatrixFunction
    C: TimeMatrixFunction
    D: TimeMatrixFunction
    system_noise: LevyModel
    observation_noise: LevyModel
    initial_mean: np.ndarray = None
    initial_cov: np.ndarray = None

    def __post_init__(self):
        for name in "ABCD":
            setattr(self, name, TimeMatrixFunction.coerce(getattr(self, name)))
        d1 = self.A.shape[0]
        if self.A.shape != (d1, d1):
            raise ModelError(f"A must be square, got {self.A.shape}")
        l, p = self.system_noise.dimension, self.observation_noise.dimension
        if self.B.shape != (d1, l):
            raise ModelError(f"B must be {d1}x{l}, got {self.B.shape}")
        d2 = self.C.shape[0]
        if self.C.shape != (d2, d1):
            raise ModelError(f"C must be d2x{d1}, got {self.C.shape}")
        if self.D.shape != (d2, p):
            raise ModelError(f"D must be {d2}x{p}, got {self.D.shape}")
        if d2 > d1:
            raise ModelError(f"observation dimension {d2} exceeds state dimension {d1}")
        if self.system_noise.q_set:
            raise ModelError("system noise must be square-integrable")
        for name, noise in (("system", self.system_noise), ("observation", self.observation_noise)):
            if np.any(noise.drift != 0):
                raise ModelError(f"{name} noise must be centred (zero drift)")
        self.initial_mean = np.zeros(d1) if self.initial_mean is None else np.asarray(self.initial_mean, float).reshape(d1)
        cov = np.zeros((d1, d1)) if self.initial_cov is None else np.atleast_2d(np.asarray(self.initial_cov, float))
        if cov.shape != (d1, d1) or not np.allclose(cov, cov.T):
            raise ModelError("initial_cov must be a symmetric d1 x d1 matrix")
        if np.linalg.eigvalsh(cov).min() < -1e-12:
            raise ModelError("initial_cov must be nonnegative-definite")
        self.initial_cov = cov

    @property
    def d1(self):
        return self.A.shape[0]

    @property
    def d2(self):
        return self.C.shape[0]

    def system_covariance(self):
        """``Lambda_1``, covariance of ``L1(1)``."""
        from .levy_core import covariance_matrix

        return covariance_matrix(self.system_noise)

    def validate_observation_matrix(self, grid):
        """Raise DegeneracyError unless D D^T is invertible at every grid time."""
        for t in grid.times if not self.D.is_constant else grid.times[:1]:
            gain_normalizer(self, t)

    @classmethod
    def scalar_ou(cls, observation_noise, mean_reversion=1.0, initial_mean=0.0, initial_var=0.0,
                  system_noise=None, C=1.0, D=1.0):
        """``dY = -mean_reversion * Y dt + dL1``, ``dZ = C Y dt + D dL2`` in one dimension."""
        return cls(A=[[-mean_reversion]], B=[[1.0]], C=[[C]], D=[[D]],
                   system_noise=system_noise or LevyModel.brownian([[1.0]]),
                   observation_noise=observation_noise,
                   initial_mean=[initial_mean], initial_cov=[[initial_var]])


def gain_normalizer(model, t):
    """``G(t) = (D(t) D(t)^T)^{-1/2}`` via a symmetric eigendecomposition."""
    D = model.D(t)
    w, v = np.linalg.eigh(D @ D.T)
    if w.min() < EIG_FLOOR:
        raise DegeneracyError(f"D(t) D(t)^T has eigenvalue {w.min():.3e} below {EIG_FLOOR:g} at t={t:g}")
    return (v / np.sqrt(w)) @ v.T


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _initial_state(model, seed, n_paths, first_path):
    if not np.any(model.initial_cov):
        return np.broadcast_to(model.initial_mean, (n_paths, model.d1)).copy()
    w, v = np.linalg.eigh(model.initial_cov)
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    y0 = np.empty((n_paths, model.d1))
    for i in range(n_paths):
        z = replicate_rng(seed, first_path + i, STREAM_INITIAL).standard_normal(model.d1)
        y0[i] = model.initial_mean + factor @ z
    return y0


def simulate_system(model, grid, seed, n_paths=1, first_path=0, noise=None):
    """Euler-Maruyama path(s) of the system process.

    ``Y_{k+1} = Y_k + A(t_k) Y_k dt + B(t_k) dL1_k`` with ``Y_0`` drawn from
    ``N(initial_mean, initial_cov)``.  ``noise`` may supply the ``dL1``
    increments as a :class:`PathGrid`; otherwise they are sampled.
    """
    if noise is None:
        noise = sample_increments(model.system_noise, grid, seed, n_paths, stream=STREAM_SYSTEM,
                                  first_path=first_path)
    _check_grid(noise, grid)
    n_paths = noise.n_paths
    times = grid.times
    A = model.A.on_grid(times)
    B = model.B.on_grid(times)
    dt = grid.dt
    Y = np.empty((n_paths, grid.n_steps + 1, model.d1))
    Y[:, 0] = _initial_state(model, seed, n_paths, first_path)
    dL = noise.increments
    for k in range(grid.n_steps):
        y = Y[:, k]
        Y[:, k + 1] = y + (y @ A[k].T) * dt + dL[:, k] @ B[k].T
    return PathGrid.from_values(grid, Y, seed)


def _check_grid(path, grid):
    if path.grid != grid:
        raise GridError(f"path grid {path.grid} does not match {grid}")


def observation_drift(model, states, grid):
    """``C(t_k) Y_k dt`` for every step, shape (paths, steps, d2)."""
    C = model.C.on_grid(grid.times)
    return np.einsum("kij,pkj->pki", C[:-1], states[:, :-1]) * grid.dt


def simulate_observation(model, system_path, seed, cutoff=math.inf, method="auto", noise=None, first_path=0):
    """Observation path(s) ``Z`` (``cutoff = inf``) or ``Z_n`` driven by ``system_path``.

    The observation noise is drawn from stream ``STREAM_OBSERVATION`` of
    ``seed``.  With ``method="layered"`` (forced for finite cutoffs) calls
    with different cutoffs share the same jump stream, so ``Z - Z_n`` is
    exactly the contribution of jumps larger than ``cutoff``.  ``noise``
    may be a :class:`PathGrid` of ``dL2`` increments or a
    :class:`~levy_kalman.levy_core.JumpStream`.
    """
    grid = system_path.grid
    n_paths = system_path.n_paths
    if noise is None:
        if math.isfinite(cutoff) or method == "layered":
            noise = sample_jump_stream(model.observation_noise, grid, seed, n_paths, STREAM_OBSERVATION, first_path)
        else:
            noise = sample_increments(model.observation_noise, grid, seed, n_paths, method=method,
                                      stream=STREAM_OBSERVATION, first_path=first_path)
    if hasattr(noise, "jump_size"):
        if noise.grid != grid:
            raise GridError("noise stream grid does not match the system path")
        dL = noise.increments(cutoff)
    else:
        _check_grid(noise, grid)
        dL = noise.increments
    if dL.shape[0] != n_paths:
        raise GridError(f"{dL.shape[0]} noise paths for {n_paths} system paths")
    D = model.D.on_grid(grid.times)
    dZ = observation_drift(model, system_path.values, grid) + np.einsum("kij,pkj->pki", D[:-1], dL)
    return PathGrid(grid, dZ, seed)


def simulate_coupled_observations(model, system_path, seed, cutoffs, first_path=0):
    """``{cutoff: Z_cutoff}`` from one shared jump stream (``math.inf`` gives ``Z``)."""
    stream = sample_jump_stream(model.observation_noise, system_path.grid, seed, system_path.n_paths,
                                STREAM_OBSERVATION, first_path)
    return {n: simulate_observation(model, system_path, seed, cutoff=n, noise=stream) for n in cutoffs}


def max_operator_norm(fn, grid):
    return float(max(np.linalg.norm(m, 2) for m in fn.on_grid(grid.times[:1] if fn.is_constant else grid.times)))


def observation_l1_convergence(model, cutoffs, grid, replicates, seed, chunk=2000):
    """Monte-Carlo ``E|Z(T) - Z_n(T)|`` on coupled replicates, with bound ``||D|| 2T int_{|y|>n}|y| nu(dy)``."""
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    cutoffs = [float(n) for n in cutoffs]
    gaps = np.empty((replicates, len(cutoffs)))
    for lo in range(0, replicates, chunk):
        k = min(chunk, replicates - lo)
        Y = simulate_system(model, grid, seed, k, first_path=lo)
        paths = simulate_coupled_observations(model, Y, seed, [math.inf] + cutoffs, first_path=lo)
        zT = paths[math.inf].values[:, -1]
        for j, n in enumerate(cutoffs):
            gaps[lo:lo + k, j] = np.linalg.norm(zT - paths[n].values[:, -1], axis=1)
    d_norm = max_operator_norm(model.D, grid)
    bounds = [d_norm * 2.0 * grid.horizon * model.observation_noise.tail_first_moment(n) for n in cutoffs]
    return l1_table(cutoffs, gaps, bounds, "E|Z(T) - Z_n(T)|")
