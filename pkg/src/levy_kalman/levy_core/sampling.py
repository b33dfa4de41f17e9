"""Path increments on a uniform grid.

Seeding
-------
Every path draws from its own generator, ``replicate_rng(seed, path_index,
stream)``, built from ``numpy.random.SeedSequence(seed, spawn_key=(path_index,
stream))``.  The root seed is hashed together with the replicate index, so
replicate ``i`` is reproducible on its own and independent of how many
replicates are requested or in which order they are computed.  Distinct
``stream`` ids separate the initial state, system noise and observation
noise of one replicate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import GridError
from .model import LevyModel, TruncatedLevyModel

STREAM_INITIAL = 0
STREAM_SYSTEM = 1
STREAM_OBSERVATION = 2


def replicate_rng(seed, *keys):
    """Generator for replicate/stream ``keys`` under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


@dataclass(frozen=True)
class TimeGrid:
    T: float
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise GridError(f"time step must be positive, got {self.dt}")
        if not self.T > self.t0:
            raise GridError("horizon T must exceed t0")
        n = (self.T - self.t0) / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise GridError(f"(T - t0) / dt = {n} is not an integer")

    @property
    def n_steps(self):
        return int(round((self.T - self.t0) / self.dt))

    @property
    def horizon(self):
        return self.T - self.t0

    @cached_property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def refine(self, factor=2):
        return TimeGrid(self.T, self.dt / factor, self.t0)


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Paths sampled on a :class:`TimeGrid`.

    ``increments`` has shape ``(n_paths, n_steps, d)`` and ``values`` shape
    ``(n_paths, n_steps + 1, d)`` with ``values[:, 0] = start`` (zero unless
    given) and ``values[:, k+1] - values[:, k] = increments[:, k]``.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int | None = None
    start: np.ndarray | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim == 2:
            inc = inc[None]
        if inc.ndim != 3 or inc.shape[1] != self.grid.n_steps:
            raise GridError(f"increments must have shape (paths, {self.grid.n_steps}, d), got {inc.shape}")
        object.__setattr__(self, "increments", inc)

    @classmethod
    def from_values(cls, grid, values, seed=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        path = cls(grid, np.diff(values, axis=1), seed, values[:, 0].copy())
        path.__dict__["values"] = values
        return path

    @property
    def t0(self):
        return self.grid.t0

    @property
    def T(self):
        return self.grid.T

    @property
    def dt(self):
        return self.grid.dt

    @property
    def times(self):
        return self.grid.times

    @property
    def n_paths(self):
        return self.increments.shape[0]

    @property
    def dimension(self):
        return self.increments.shape[2]

    @cached_property
    def values(self):
        n, _, d = self.increments.shape
        start = np.zeros((n, d)) if self.start is None else np.broadcast_to(self.start, (n, d))
        out = np.empty((n, self.grid.n_steps + 1, d))
        out[:, 0] = start
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        out[:, 1:] += start[:, None, :]
        return out

    def terminal(self):
        return self.values[:, -1]

    def to_csv(self, path, index=0, prefix="x"):
        """Write path ``index`` as ``t, x1..xd`` with 17 significant digits."""
        write_csv(path, ["t"] + [f"{prefix}{i + 1}" for i in range(self.dimension)],
                  np.column_stack([self.times, self.values[index]]))


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data


def _gaussian_factor(cov):
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class JumpStream:
    """All randomness of a noise process on a grid, with the jumps kept separate.

    ``brownian`` holds the Brownian and drift layer, ``small`` the Gaussian
    stand-in for stable jumps below the per-step threshold, and the sparse
    arrays list every larger jump as (path, step, axis, size).
    :meth:`increments` re-assembles increments for any cutoff from the same
    draws, so truncated and untruncated paths are coupled exactly.
    """

    grid: TimeGrid
    model: LevyModel
    brownian: np.ndarray
    small: np.ndarray
    jump_path: np.ndarray
    jump_step: np.ndarray
    jump_axis: np.ndarray
    jump_size: np.ndarray
    seed: int

    def _scatter(self, mask):
        p, n, d = self.brownian.shape
        flat = (self.jump_path[mask] * n + self.jump_step[mask]) * d + self.jump_axis[mask]
        return np.bincount(flat, weights=self.jump_size[mask], minlength=p * n * d).reshape(p, n, d)

    def _small_factor(self, cutoff):
        # a cutoff below the small-jump threshold shrinks the Gaussian layer
        f = np.ones(self.model.dimension)
        for c in self.model.jumps:
            if c.kind == "symmetric_stable":
                eps = c.small_jump_threshold(self.grid.dt)
                if cutoff < eps:
                    f[c.axis] = math.sqrt(c.second_moment(cutoff) / c.second_moment(eps))
        return f

    def increments(self, cutoff=math.inf):
        jumps = self._scatter(np.abs(self.jump_size) <= cutoff)
        return self.brownian + self.small * self._small_factor(cutoff) + jumps

    def tail(self, cutoff):
        """Per-step sum of the jumps strictly larger than ``cutoff``."""
        return self._scatter(np.abs(self.jump_size) > cutoff)

    def path(self, cutoff=math.inf):
        return PathGrid(self.grid, self.increments(cutoff), self.seed)


def _component_layers(model, rng, grid, method):
    """Draw every jump component of one path, in a fixed order."""
    n, dt, d = grid.n_steps, grid.dt, model.dimension
    small = np.zeros((n, d))
    steps, axes, sizes = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)], [np.zeros(0)]
    for comp in model.jumps:
        dense, st, sz = comp.sample_layers(rng, n, dt, method=method)
        small[:, comp.axis] += dense
        steps.append(st)
        axes.append(np.full(st.shape, comp.axis, dtype=np.int64))
        sizes.append(sz)
    return small, np.concatenate(steps), np.concatenate(axes), np.concatenate(sizes)


def _resolve(model):
    if isinstance(model, TruncatedLevyModel):
        return model.base, model.cutoff
    if isinstance(model, LevyModel):
        return model, math.inf
    raise TypeError(f"expected a LevyModel or TruncatedLevyModel, got {type(model).__name__}")


def _brownian_layer(model, rng, grid, factor):
    n, d, dt = grid.n_steps, model.dimension, grid.dt
    return math.sqrt(dt) * rng.standard_normal((n, d)) @ factor.T + model.drift * dt


def sample_jump_stream(model, grid, seed, n_paths=1, stream=STREAM_OBSERVATION, first_path=0):
    """Layered draw of the untruncated noise, shared by every cutoff.

    Path ``i`` uses ``replicate_rng(seed, first_path + i, stream)``; the
    Brownian layer is drawn before the jump components.
    """
    base, _ = _resolve(model)
    if not isinstance(grid, TimeGrid):
        raise GridError("grid must be a TimeGrid")
    n, d = grid.n_steps, base.dimension
    factor = _gaussian_factor(base.gaussian_cov)
    brownian = np.empty((n_paths, n, d))
    small = np.empty((n_paths, n, d))
    jp, js, ja, jz = [], [], [], []
    for i in range(n_paths):
        rng = replicate_rng(seed, first_path + i, stream)
        brownian[i] = _brownian_layer(base, rng, grid, factor)
        small[i], st, ax, sz = _component_layers(base, rng, grid, "layered")
        jp.append(np.full(st.shape, i, dtype=np.int64))
        js.append(st)
        ja.append(ax)
        jz.append(sz)
    return JumpStream(grid, base, brownian, small, np.concatenate(jp), np.concatenate(js),
                      np.concatenate(ja), np.concatenate(jz), int(seed))


def sample_increments(model, grid, seed, n_paths=1, method="auto", stream=STREAM_OBSERVATION, first_path=0):
    """Sample increments of ``model`` on ``grid``.

    Parameters
    ----------
    model : LevyModel or TruncatedLevyModel
    grid : TimeGrid
    seed : int
    n_paths : int
    method : {"auto", "exact", "layered"}
        ``"exact"`` draws untruncated stable increments with the
        Chambers-Mallows-Stuck transform.  ``"layered"`` uses a Gaussian
        small-jump layer plus compound-Poisson large jumps; it is the only
        option for truncated models and the one that couples different
        cutoffs.  ``"auto"`` picks exact when the model is untruncated.

    Returns
    -------
    PathGrid
    """
    if not isinstance(grid, TimeGrid):
        raise GridError("grid must be a TimeGrid")
    base, cutoff = _resolve(model)
    if method == "auto":
        method = "exact" if math.isinf(cutoff) else "layered"
    if method == "layered":
        return PathGrid(grid, sample_jump_stream(base, grid, seed, n_paths, stream, first_path).increments(cutoff),
                        int(seed))
    if method != "exact":
        raise ValueError(f"unknown sampling method {method!r}")
    if math.isfinite(cutoff):
        raise ValueError("exact sampling requires an untruncated model")
    d, n, dt = base.dimension, grid.n_steps, grid.dt
    factor = _gaussian_factor(base.gaussian_cov)
    out = np.empty((n_paths, n, d))
    for i in range(n_paths):
        rng = replicate_rng(seed, first_path + i, stream)
        inc = _brownian_layer(base, rng, grid, factor)
        for comp in base.jumps:
            dense, st, sz = comp.sample_layers(rng, n, dt, method="exact" if comp.kind == "symmetric_stable"
                                               else "layered")
            inc[:, comp.axis] += dense
            np.add.at(inc[:, comp.axis], st, sz)
        out[i] = inc
    return PathGrid(grid, out, int(seed))


@dataclass
class ConvergenceTable:
    """Rows of (cutoff, empirical L1 gap, Monte-Carlo standard error, analytic bound)."""

    cutoffs: np.ndarray
    empirical: np.ndarray
    std_error: np.ndarray
    bound: np.ndarray
    label: str = "E|L(T) - L_n(T)|"

    def rows(self):
        return list(zip(self.cutoffs.tolist(), self.empirical.tolist(), self.std_error.tolist(),
                        self.bound.tolist()))

    def within_bound(self, n_se=3.0):
        return bool(np.all(self.empirical <= self.bound + n_se * self.std_error))

    def loglog_slope(self):
        m = self.empirical > 0
        return float(np.polyfit(np.log(self.cutoffs[m]), np.log(self.empirical[m]), 1)[0])

    def header(self):
        return ["cutoff", self.label, "std_error", "bound"]


def l1_table(cutoffs, gaps, bounds, label):
    """Collapse per-replicate gaps (replicates, cutoffs) into a ConvergenceTable."""
    gaps = np.asarray(gaps)
    r = gaps.shape[0]
    return ConvergenceTable(np.asarray(cutoffs, dtype=float), gaps.mean(axis=0),
                            gaps.std(axis=0, ddof=1) / math.sqrt(r), np.asarray(bounds, dtype=float), label)


def empirical_l1_convergence(model, cutoffs, grid, replicates, seed, chunk=2000):
    """Monte-Carlo estimate of ``E|L(T) - L_n(T)|`` along a cutoff ladder.

    The analytic column is ``2 (T - t0) int_{|y| > n} |y| nu(dy)``.
    Truncated and untruncated paths come from one :class:`JumpStream`
    per replicate.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    base, _ = _resolve(model)
    cutoffs = np.asarray(cutoffs, dtype=float)
    gaps = np.empty((replicates, cutoffs.size))
    for lo in range(0, replicates, chunk):
        k = min(chunk, replicates - lo)
        stream = sample_jump_stream(base, grid, seed, k, STREAM_OBSERVATION, first_path=lo)
        full = stream.increments().sum(axis=1)
        for j, n in enumerate(cutoffs):
            gaps[lo:lo + k, j] = np.linalg.norm(full - stream.increments(n).sum(axis=1), axis=1)
    bounds = [2.0 * grid.horizon * base.tail_first_moment(n) for n in cutoffs]
    return l1_table(cutoffs, gaps, bounds, "E|L(T) - L_n(T)|")
