"""One-dimensional Lévy measures living on a coordinate axis.

Every component is symmetric, hence centred without an explicit
compensator.  Each knows how to integrate ``y**2`` below a cutoff, ``|y|``
above a cutoff, and how to draw its contribution to per-step increments.

Two sampling layouts are produced by :meth:`JumpComponent.sample_layers`:

* a *dense* array with one Gaussian-like value per step, and
* a *sparse* list of (step, size) jumps.

Truncation at a cutoff ``n`` removes sparse jumps with ``|size| > n``; the
dense layer never carries jumps larger than the per-step scale, which is
what makes coupled truncated/untruncated paths possible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from ..errors import ModelError, RegimeError, ResolutionError

QUAD_RTOL = 1e-10


def _check_cutoff(cutoff):
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff!r}")


# ---------------------------------------------------------------------------
# symmetric alpha-stable constant
# ---------------------------------------------------------------------------

def _stable_constant_closed_form(alpha):
    return math.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0) / math.pi


def stable_cos_integral(alpha):
    """Return ``int (1 - cos y) |y|**(-1-alpha) dy`` over the real line by quadrature.

    The integral is split at 1: the inner piece uses an algebraic weight
    for the ``y**(1-alpha)`` singularity, the outer piece a Fourier weight.
    """
    def smooth(y):
        # (1 - cos y) / y**2, series near 0 avoids cancellation
        if y < 1e-4:
            return 0.5 - y * y / 24.0
        return (1.0 - math.cos(y)) / (y * y)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        inner, _ = integrate.quad(smooth, 0.0, 1.0, weight="alg", wvar=(1.0 - alpha, 0.0),
                                  epsabs=0.0, epsrel=1e-13, limit=200)
        cos_tail, _ = integrate.quad(lambda y: y ** (-1.0 - alpha), 1.0, np.inf,
                                     weight="cos", wvar=1.0, epsabs=1e-15, limlst=200)
    return 2.0 * (inner + 1.0 / alpha - cos_tail)


@lru_cache(maxsize=None)
def stable_density_constant(alpha):
    """Density constant ``c`` of the symmetric stable Lévy measure ``c |y|**(-1-alpha) dy``.

    Normalised so that ``int (1 - cos(u y)) nu(dy) = |u|**alpha``, i.e. the
    process has characteristic function ``exp(-t |u|**alpha)``.  The closed
    form ``Gamma(1+alpha) sin(pi alpha / 2) / pi`` is checked against
    quadrature at ``u = 1`` the first time each ``alpha`` is requested.
    """
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise RegimeError(f"alpha must lie strictly inside (1, 2), got {alpha}")
    c = _stable_constant_closed_form(alpha)
    residual = abs(c * stable_cos_integral(alpha) - 1.0)
    if residual > 1e-8:
        raise ArithmeticError(f"stable density constant failed quadrature check "
                              f"(alpha={alpha}, residual={residual:.3e})")
    return c


# ---------------------------------------------------------------------------
# jump laws for compound Poisson components
# ---------------------------------------------------------------------------

class JumpLaw:
    """Symmetric one-dimensional jump-size distribution with finite mean."""

    finite_variance = True

    def abs_mean(self):
        return self.tail_abs_moment(0.0)

    def truncated_second_moment(self, cutoff):
        """``E[J**2; |J| <= cutoff]``."""
        raise NotImplementedError

    def tail_abs_moment(self, cutoff):
        """``E[|J|; |J| > cutoff]``."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class TwoPoint(JumpLaw):
    """Jumps of size exactly ``+size`` or ``-size`` with equal probability."""

    size: float = 1.0

    def __post_init__(self):
        if not self.size > 0:
            raise ModelError("two-point jump size must be positive")

    def truncated_second_moment(self, cutoff):
        return self.size ** 2 if self.size <= cutoff else 0.0

    def tail_abs_moment(self, cutoff):
        return self.size if self.size > cutoff else 0.0

    def sample(self, rng, size):
        return self.size * rng.choice(np.array([-1.0, 1.0]), size=size)


@dataclass(frozen=True)
class Normal(JumpLaw):
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0:
            raise ModelError("normal jump std must be positive")

    def truncated_second_moment(self, cutoff):
        if math.isinf(cutoff):
            return self.std ** 2
        # no closed form used on purpose: this is the quadrature fallback path
        density = lambda y: y * y * math.exp(-0.5 * (y / self.std) ** 2) / (self.std * math.sqrt(2 * math.pi))
        val, _ = integrate.quad(density, 0.0, cutoff, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        return 2.0 * val

    def tail_abs_moment(self, cutoff):
        z = cutoff / self.std
        return 2.0 * self.std * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    def sample(self, rng, size):
        return rng.normal(0.0, self.std, size=size)


@dataclass(frozen=True)
class Uniform(JumpLaw):
    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ModelError("uniform half-width must be positive")

    def truncated_second_moment(self, cutoff):
        m = min(cutoff, self.half_width)
        return m ** 3 / (3.0 * self.half_width)

    def tail_abs_moment(self, cutoff):
        h = self.half_width
        if cutoff >= h:
            return 0.0
        return (h * h - cutoff * cutoff) / (2.0 * h)

    def sample(self, rng, size):
        return rng.uniform(-self.half_width, self.half_width, size=size)


@dataclass(frozen=True)
class SymmetricPareto(JumpLaw):
    """``|J| = minimum * U**(-1/alpha)`` with a random sign.

    Finite mean requires ``alpha > 1``; the variance is infinite for
    ``alpha <= 2``.
    """

    alpha: float = 1.5
    minimum: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise RegimeError("Pareto jump index must exceed 1 for a finite mean")
        if not self.minimum > 0:
            raise ModelError("Pareto minimum must be positive")

    @property
    def finite_variance(self):
        return self.alpha > 2

    def truncated_second_moment(self, cutoff):
        a, m = self.alpha, self.minimum
        if cutoff <= m:
            return 0.0
        if math.isinf(cutoff):
            return math.inf if a <= 2 else a * m * m / (a - 2)
        if a == 2:
            return a * m * m * math.log(cutoff / m)
        return a * m ** a * (cutoff ** (2 - a) - m ** (2 - a)) / (2 - a)

    def tail_abs_moment(self, cutoff):
        a, m = self.alpha, self.minimum
        return a * m ** a * max(cutoff, m) ** (1 - a) / (a - 1)

    def sample(self, rng, size):
        u = 1.0 - rng.random(size)
        sign = rng.choice(np.array([-1.0, 1.0]), size=size)
        return sign * self.minimum * u ** (-1.0 / self.alpha)


JUMP_LAWS = {
    "two_point": TwoPoint,
    "normal": Normal,
    "uniform": Uniform,
    "symmetric_pareto": SymmetricPareto,
}


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------

class JumpComponent:
    """A one-dimensional Lévy measure concentrated on coordinate axis ``axis``."""

    kind = "abstract"
    axis: int

    @property
    def infinite_variance(self):
        return False

    def second_moment(self, cutoff=math.inf):
        """``int_{|y| <= cutoff} y**2 nu(dy)``."""
        raise NotImplementedError

    def tail_first_moment(self, cutoff):
        """``int_{|y| > cutoff} |y| nu(dy)``."""
        raise NotImplementedError

    def sample_layers(self, rng, n_steps, dt, cutoff=math.inf, method="layered"):
        """Draw (dense, jump_steps, jump_sizes) for one path.

        ``dense`` has shape ``(n_steps,)``.  For a fixed ``rng`` state the
        random draws consumed do not depend on ``cutoff``; truncation is
        applied afterwards, so different cutoffs share one jump stream.
        """
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class NoJumps(JumpComponent):
    axis: int = 0
    kind = "none"

    def second_moment(self, cutoff=math.inf):
        return 0.0

    def tail_first_moment(self, cutoff):
        return 0.0

    def sample_layers(self, rng, n_steps, dt, cutoff=math.inf, method="layered"):
        return np.zeros(n_steps), np.zeros(0, dtype=np.int64), np.zeros(0)

    def to_dict(self):
        return {"kind": self.kind, "axis": self.axis}


@dataclass(frozen=True)
class SymmetricStable(JumpComponent):
    """Symmetric alpha-stable jumps, Lévy density ``c_alpha scale**alpha |y|**(-1-alpha)``.

    ``scale`` is the usual stable scale ``sigma``: the characteristic
    function of the process at time ``t`` is ``exp(-t sigma**alpha |u|**alpha)``.
    With ``scale=1`` the dispersion is 1.
    """

    alpha: float = 1.5
    scale: float = 1.0
    axis: int = 0
    kind = "symmetric_stable"

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise RegimeError(f"symmetric-stable alpha must lie in (1, 2), got {self.alpha}")
        if not self.scale > 0:
            raise ModelError("stable scale must be positive")

    @property
    def infinite_variance(self):
        return True

    @property
    def intensity_constant(self):
        return stable_density_constant(self.alpha) * self.scale ** self.alpha

    def second_moment(self, cutoff=math.inf):
        _check_cutoff(cutoff)
        if math.isinf(cutoff):
            return math.inf
        a = self.alpha
        return 2.0 * self.intensity_constant * cutoff ** (2.0 - a) / (2.0 - a)

    def tail_first_moment(self, cutoff):
        _check_cutoff(cutoff)
        a = self.alpha
        return 2.0 * self.intensity_constant * cutoff ** (1.0 - a) / (a - 1.0)

    def tail_mass(self, x):
        """``nu(|y| > x)``."""
        return 2.0 * self.intensity_constant * x ** (-self.alpha) / self.alpha

    def small_jump_threshold(self, dt):
        return self.scale * dt ** (1.0 / self.alpha)

    def sample_layers(self, rng, n_steps, dt, cutoff=math.inf, method="layered"):
        if method == "exact":
            if not math.isinf(cutoff):
                raise ValueError("exact stable sampling is only available without truncation")
            dense = self.scale * dt ** (1.0 / self.alpha) * sample_standard_stable(rng, self.alpha, n_steps)
            return dense, np.zeros(0, dtype=np.int64), np.zeros(0)
        eps = self.small_jump_threshold(dt)
        z = rng.standard_normal(n_steps)
        counts = rng.poisson(self.tail_mass(eps) * dt, size=n_steps)
        total = int(counts.sum())
        u = 1.0 - rng.random(total)
        sign = rng.choice(np.array([-1.0, 1.0]), size=total)
        sizes = sign * eps * u ** (-1.0 / self.alpha)
        steps = np.repeat(np.arange(n_steps), counts)
        small_var = self.second_moment(min(eps, cutoff)) * dt
        keep = np.abs(sizes) <= cutoff
        return math.sqrt(small_var) * z, steps[keep], sizes[keep]

    def to_dict(self):
        return {"kind": self.kind, "axis": self.axis, "alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class CompoundPoisson(JumpComponent):
    rate: float = 1.0
    law: JumpLaw = field(default_factory=TwoPoint)
    axis: int = 0
    kind = "compound_poisson"

    def __post_init__(self):
        if not self.rate > 0:
            raise ModelError("compound Poisson rate must be positive")
        if not math.isfinite(self.law.abs_mean()):
            raise RegimeError("compound Poisson jump law must have a finite mean")

    @property
    def infinite_variance(self):
        return not self.law.finite_variance

    def second_moment(self, cutoff=math.inf):
        _check_cutoff(cutoff)
        return self.rate * self.law.truncated_second_moment(cutoff)

    def tail_first_moment(self, cutoff):
        _check_cutoff(cutoff)
        return self.rate * self.law.tail_abs_moment(cutoff)

    def sample_layers(self, rng, n_steps, dt, cutoff=math.inf, method="layered"):
        counts = rng.poisson(self.rate * dt, size=n_steps)
        sizes = self.law.sample(rng, int(counts.sum()))
        steps = np.repeat(np.arange(n_steps), counts)
        keep = np.abs(sizes) <= cutoff
        return np.zeros(n_steps), steps[keep], sizes[keep]

    def to_dict(self):
        law = {"name": next(k for k, v in JUMP_LAWS.items() if isinstance(self.law, v))}
        law.update(self.law.__dict__)
        return {"kind": self.kind, "axis": self.axis, "rate": self.rate, "law": law}


def _linear_moment(r, f, p):
    """Exact ``int y**p f(y) dy`` for ``f`` linear between the samples ``(r, f)``."""
    a, b = r[:-1], r[1:]
    slope = np.diff(f) / np.diff(r)
    intercept = f[:-1] - slope * a
    return float(np.sum(intercept * (b ** (p + 1) - a ** (p + 1)) / (p + 1)
                        + slope * (b ** (p + 2) - a ** (p + 2)) / (p + 2)))


@dataclass(frozen=True, eq=False)
class TabulatedJumps(JumpComponent):
    """Symmetric Lévy density given by samples ``density[k]`` at radii ``radii[k]``.

    The density is interpolated linearly between samples (moments are
    integrated exactly for that interpolant) and the measure is
    taken to vanish outside ``[radii[0], radii[-1]]``.  Asking for a cutoff
    beyond the last radius while the last sample is still positive means the
    table does not resolve the tail, which raises :class:`ResolutionError`.
    """

    radii: np.ndarray = None
    density: np.ndarray = None
    axis: int = 0
    kind = "tabulated"

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if r.ndim != 1 or r.shape != f.shape or r.size < 2:
            raise ModelError("tabulated measure needs matching 1-d radii/density with >= 2 samples")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ModelError("tabulated radii must be nonnegative and strictly increasing")
        if np.any(f < 0):
            raise ModelError("tabulated density must be nonnegative")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "density", f)

    def _clip(self, cutoff):
        r, f = self.radii, self.density
        if cutoff > r[-1] and f[-1] > 0:
            raise ResolutionError(f"tabulated grid ends at {r[-1]} with positive density; "
                                  f"cannot resolve cutoff {cutoff}")
        return min(cutoff, r[-1])

    def _restricted(self, lo, hi):
        r, f = self.radii, self.density
        inside = (r > lo) & (r < hi)
        rr = np.concatenate([[lo], r[inside], [hi]])
        ff = np.interp(rr, r, f, left=0.0, right=0.0)
        return rr, ff

    def second_moment(self, cutoff=math.inf):
        _check_cutoff(cutoff)
        hi = self._clip(cutoff)
        if hi <= self.radii[0]:
            return 0.0
        rr, ff = self._restricted(self.radii[0], hi)
        return 2.0 * _linear_moment(rr, ff, 2)

    def tail_first_moment(self, cutoff):
        _check_cutoff(cutoff)
        if cutoff >= self.radii[-1]:
            return 0.0
        rr, ff = self._restricted(max(cutoff, self.radii[0]), self.radii[-1])
        return 2.0 * _linear_moment(rr, ff, 1)

    @property
    def total_mass(self):
        return 2.0 * float(np.trapezoid(self.density, self.radii))

    def _inverse_cdf(self, u):
        # exact inversion of the piecewise-linear density
        r, f = self.radii, self.density
        widths = np.diff(r)
        cell_mass = 0.5 * (f[:-1] + f[1:]) * widths
        cum = np.concatenate([[0.0], np.cumsum(cell_mass)])
        target = u * cum[-1]
        k = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(widths) - 1)
        m = target - cum[k]
        f0 = f[k]
        slope = (f[k + 1] - f[k]) / widths[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            quad_root = (-f0 + np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * m, 0.0))) / slope
            lin_root = m / f0
        x = np.where(np.abs(slope) > 1e-14, quad_root, lin_root)
        return r[k] + np.clip(np.nan_to_num(x), 0.0, widths[k])

    def sample_layers(self, rng, n_steps, dt, cutoff=math.inf, method="layered"):
        counts = rng.poisson(self.total_mass * dt, size=n_steps)
        total = int(counts.sum())
        mags = self._inverse_cdf(rng.random(total))
        sign = rng.choice(np.array([-1.0, 1.0]), size=total)
        sizes = sign * mags
        steps = np.repeat(np.arange(n_steps), counts)
        keep = np.abs(sizes) <= cutoff
        return np.zeros(n_steps), steps[keep], sizes[keep]

    def to_dict(self):
        return {"kind": self.kind, "axis": self.axis,
                "radii": self.radii.tolist(), "density": self.density.tolist()}


def sample_standard_stable(rng, alpha, size):
    """Symmetric stable variates with characteristic function ``exp(-|u|**alpha)``.

    Chambers-Mallows-Stuck transform of a uniform angle and a unit exponential.
    """
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    w = rng.standard_exponential(size=size)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def jump_second_moment(spec, cutoff):
    """``int_{|y| <= cutoff} y**2 nu(dy)`` for one component (``None`` means no jumps)."""
    _check_cutoff(cutoff)
    if spec is None:
        return 0.0
    return spec.second_moment(cutoff)


def jump_tail_first_moment(spec, cutoff):
    """``int_{|y| > cutoff} |y| nu(dy)`` for one component."""
    _check_cutoff(cutoff)
    if spec is None:
        return 0.0
    return spec.tail_first_moment(cutoff)


def component_from_dict(data, where="jumps"):
    """Build a component from its plain-dict form (as stored in config files)."""
    from ..errors import ConfigError

    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError(where, "jump component needs a 'kind'")
    kind = data["kind"]
    axis = int(data.get("axis", 0))
    try:
        if kind == "none":
            return NoJumps(axis=axis)
        if kind == "symmetric_stable":
            return SymmetricStable(alpha=float(data["alpha"]), scale=float(data.get("scale", 1.0)), axis=axis)
        if kind == "compound_poisson":
            law = dict(data["law"])
            name = law.pop("name")
            if name not in JUMP_LAWS:
                raise ConfigError(f"{where}.law.name", f"unknown jump law {name!r}; "
                                  f"expected one of {sorted(JUMP_LAWS)}")
            return CompoundPoisson(rate=float(data["rate"]),
                                   law=JUMP_LAWS[name](**{k: float(v) for k, v in law.items()}),
                                   axis=axis)
        if kind == "tabulated":
            return TabulatedJumps(radii=data["radii"], density=data["density"], axis=axis)
    except KeyError as exc:
        raise ConfigError(where, f"missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ConfigError(where, str(exc)) from None
    raise ConfigError(f"{where}.kind", f"unknown jump kind {kind!r}")


__all__ = [
    "CompoundPoisson", "JUMP_LAWS", "JumpComponent", "JumpLaw", "NoJumps", "Normal",
    "SymmetricPareto", "SymmetricStable", "TabulatedJumps", "TwoPoint", "Uniform",
    "component_from_dict", "jump_second_moment", "jump_tail_first_moment",
    "sample_standard_stable", "stable_density_constant",
]
