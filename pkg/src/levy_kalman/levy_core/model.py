"""Lévy processes described by their characteristics, and truncations of them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfiniteVarianceError, ModelError, SingularityError
from .measures import JumpComponent, NoJumps, component_from_dict

PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LevyModel:
    """Centred Lévy process on R^d: drift, Brownian covariance and axis-aligned jumps.

    Jump components are independent one-dimensional measures on coordinate
    axes, so cross moments ``int y_i y_j nu(dy)`` (i != j) vanish identically.

    Parameters
    ----------
    dimension : int
    gaussian_cov : array_like, shape (d, d)
        Covariance ``a`` of the Brownian part; symmetric nonnegative-definite.
    jumps : sequence of JumpComponent
    drift : array_like, shape (d,), optional
        Must be zero for models used as filter noise.
    """

    dimension: int
    gaussian_cov: np.ndarray = None
    jumps: tuple = ()
    drift: np.ndarray = None

    def __post_init__(self):
        d = int(self.dimension)
        if d < 1:
            raise ModelError("dimension must be a positive integer")
        a = np.zeros((d, d)) if self.gaussian_cov is None else np.array(self.gaussian_cov, dtype=float)
        if a.shape != (d, d):
            raise ModelError(f"gaussian_cov must be {d}x{d}, got shape {a.shape}")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ModelError("gaussian_cov must be symmetric")
        if d and np.linalg.eigvalsh(a).min() < -PSD_TOL * max(1.0, np.abs(a).max()):
            raise ModelError("gaussian_cov must be nonnegative-definite")
        b = np.zeros(d) if self.drift is None else np.array(self.drift, dtype=float)
        if b.shape != (d,):
            raise ModelError(f"drift must have shape ({d},)")
        jumps = tuple(self.jumps)
        for comp in jumps:
            if not isinstance(comp, JumpComponent):
                raise ModelError(f"not a jump component: {comp!r}")
            if not 0 <= comp.axis < d:
                raise ModelError(f"jump axis {comp.axis} outside 0..{d - 1}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "dimension", d)
        object.__setattr__(self, "gaussian_cov", a)
        object.__setattr__(self, "drift", b)
        object.__setattr__(self, "jumps", jumps)

    # -- constructors ------------------------------------------------------

    @classmethod
    def brownian(cls, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(cov.shape[0], cov)

    @classmethod
    def stable(cls, alpha, scale=1.0, dimension=1, axes=None):
        """Independent symmetric alpha-stable coordinates (no Brownian part)."""
        from .measures import SymmetricStable

        axes = range(dimension) if axes is None else axes
        return cls(dimension, jumps=tuple(SymmetricStable(alpha, scale, axis=i) for i in axes))

    @classmethod
    def from_dict(cls, data, where="noise"):
        from ..errors import ConfigError

        if not isinstance(data, dict):
            raise ConfigError(where, "expected a mapping")
        try:
            d = int(data["dimension"])
        except KeyError:
            raise ConfigError(f"{where}.dimension", "required") from None
        cov = data.get("gaussian_cov")
        if cov is not None:
            cov = np.asarray(cov, dtype=float)
            if cov.ndim == 1:
                cov = cov.reshape(d, d)
        jumps = tuple(component_from_dict(j, f"{where}.jumps[{i}]")
                      for i, j in enumerate(data.get("jumps", [])))
        try:
            model = cls(d, cov, jumps, data.get("drift"))
        except ModelError as exc:
            raise ConfigError(where, str(exc)) from None
        declared = data.get("infinite_variance_set")
        if declared is not None and sorted(declared) != model.q_set:
            raise ConfigError(f"{where}.infinite_variance_set",
                              f"declared {sorted(declared)} but jump components give {model.q_set}")
        return model

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "gaussian_cov": self.gaussian_cov.tolist(),
            "jumps": [c.to_dict() for c in self.jumps if not isinstance(c, NoJumps)],
            "infinite_variance_set": self.q_set,
        }

    # -- structure ---------------------------------------------------------

    @property
    def q_set(self):
        """Sorted axes whose jump part has an infinite second moment."""
        return sorted({c.axis for c in self.jumps if c.infinite_variance})

    @property
    def square_integrable(self):
        return not self.q_set

    @property
    def fully_infinite_variance(self):
        return len(self.q_set) == self.dimension

    def components_on(self, axis):
        return [c for c in self.jumps if c.axis == axis]

    def jump_second_moments(self, cutoff=math.inf):
        """Per-axis ``int_{|y| <= cutoff} y_i**2 nu(dy)`` as a length-d array."""
        out = np.zeros(self.dimension)
        for c in self.jumps:
            out[c.axis] += c.second_moment(cutoff)
        return out

    def tail_first_moment(self, cutoff):
        """``int_{|y| > cutoff} |y| nu(dy)``, summed over the axis-aligned components."""
        return float(sum(c.tail_first_moment(cutoff) for c in self.jumps))

    def beta(self, cutoff):
        """Largest truncated second moment over the infinite-variance axes (0 if there are none)."""
        q = self.q_set
        if not q:
            return 0.0
        return float(self.jump_second_moments(cutoff)[q].max())

    def truncate(self, cutoff):
        return TruncatedLevyModel(self, cutoff)

    def sampling_cutoff(self):
        return math.inf


@dataclass(frozen=True, eq=False)
class TruncatedLevyModel:
    """``base`` with every jump larger than ``cutoff`` in absolute value removed."""

    base: LevyModel
    cutoff: float

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ModelError("truncation cutoff must be positive")

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def gaussian_cov(self):
        return self.base.gaussian_cov

    @property
    def drift(self):
        return self.base.drift

    @property
    def jumps(self):
        return self.base.jumps

    @property
    def q_set(self):
        return [] if math.isfinite(self.cutoff) else self.base.q_set

    def jump_second_moments(self, cutoff=math.inf):
        return self.base.jump_second_moments(min(cutoff, self.cutoff))

    def tail_first_moment(self, cutoff):
        return self.base.tail_first_moment(cutoff) - self.base.tail_first_moment(max(cutoff, self.cutoff))

    def sampling_cutoff(self):
        return self.cutoff

    def to_dict(self):
        out = self.base.to_dict()
        out["cutoff"] = self.cutoff
        return out


def covariance_matrix(model, cutoff=None):
    """Covariance ``Theta = a + psi`` of ``L(1)`` (jump part truncated at ``cutoff`` if given).

    For a :class:`TruncatedLevyModel` the jump part is ``Lambda^(n)``.  The
    trace equals ``tr(a) + int |y|**2 nu(dy)``.
    """
    if cutoff is None:
        cutoff = model.sampling_cutoff()
    if math.isinf(cutoff) and model.q_set:
        raise InfiniteVarianceError(f"axes {model.q_set} have infinite second moment; "
                                    "truncate the model or pass a finite cutoff")
    psi = model.jump_second_moments(cutoff)
    return np.array(model.gaussian_cov) + np.diag(psi)


@dataclass
class UpsilonReport:
    """Ladder of ``(Lambda^(n))^{-1}`` and the resulting limit estimate."""

    cutoffs: np.ndarray
    inverses: np.ndarray
    differences: np.ndarray
    limit: np.ndarray
    converged: bool
    tolerance: float = 1e-6
    structural_limit: np.ndarray = field(default=None)

    def rows(self):
        """(cutoff, max-norm distance to previous iterate, max-norm distance to the structural limit)."""
        out = []
        for k, n in enumerate(self.cutoffs):
            prev = self.differences[k - 1] if k else math.nan
            out.append((float(n), float(prev), float(np.abs(self.inverses[k] - self.structural_limit).max())))
        return out


def structural_upsilon(model):
    """Exact ``lim (Lambda^(n))^{-1}`` for an axis-aligned model.

    Finite-variance axes keep the inverse of their covariance block; every
    infinite-variance axis contributes a zero row and column.
    """
    d = model.dimension
    q = model.q_set
    keep = [i for i in range(d) if i not in q]
    out = np.zeros((d, d))
    if keep:
        psi = model.jump_second_moments(math.inf)
        psi[q] = 0.0
        theta = model.gaussian_cov + np.diag(psi)
        block = theta[np.ix_(keep, keep)]
        if np.linalg.eigvalsh(block).min() <= 1e-12 * max(1.0, np.abs(block).max()):
            raise SingularityError("finite-variance block of the noise covariance is singular", cutoff=math.inf)
        out[np.ix_(keep, keep)] = np.linalg.inv(block)
    return out


def upsilon_infinity(model, cutoffs, tol=1e-6):
    """Invert the truncated covariance along an increasing cutoff ladder.

    ``Lambda^(n)`` here is the full covariance ``a + psi^(n)`` of the
    truncated process (the Brownian axes contribute their variances, as in
    the block-diagonal example with unit Brownian entries).  The reported
    limit is the last iterate; convergence is declared when the last two
    iterates are within ``tol`` in max-norm.
    """
    cutoffs = np.asarray(cutoffs, dtype=float)
    if cutoffs.ndim != 1 or cutoffs.size < 3:
        raise ValueError("cutoff ladder needs at least 3 entries")
    if np.any(np.diff(cutoffs) <= 0):
        raise ValueError("cutoff ladder must be strictly increasing")
    inverses = []
    for n in cutoffs:
        lam = covariance_matrix(model, cutoff=n)
        w = np.linalg.eigvalsh(lam)
        if w.min() <= 1e-12 * max(1.0, w.max()):
            raise SingularityError(f"Lambda^(n) is singular at cutoff n={n:g}", cutoff=float(n))
        inverses.append(np.linalg.inv(lam))
    inverses = np.array(inverses)
    diffs = np.abs(np.diff(inverses, axis=0)).reshape(len(cutoffs) - 1, -1).max(axis=1)
    return UpsilonReport(cutoffs=cutoffs, inverses=inverses, differences=diffs,
                         limit=inverses[-1], converged=bool(diffs[-1] < tol), tolerance=tol,
                         structural_limit=structural_upsilon(model))
