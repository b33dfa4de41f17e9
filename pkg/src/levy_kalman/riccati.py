"""Riccati equations for the error matrix and the observation-noise weighting.

All variants integrate

    dS/dt = A S + S A^T + B Lambda1 B^T - S C^T G^T Xi G C S

with classical RK4 on the simulation grid, where the weighting ``Xi(t)`` is

* ``standard``            -- the inverse noise normalisation of the (truncated) observation noise,
* ``limiting``            -- its limit ``Phi(t)`` as the truncation level goes to infinity,
* ``linear-degenerate``   -- zero (fully infinite-variance observations).

Two conventions for the weighting are supported.  ``"intensity"`` (the
default) inverts the rate ``d Sigma2/dt = G D Lambda2 D^T G^T``, which makes
the standard variant coincide with the classical Kalman-Bucy filter.
``"cumulative"`` inverts ``Sigma2(t)`` itself; it carries a ``1/t``
singularity, so those solutions start with one linear Euler step to
``t = dt`` and continue with RK4 from there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, InstabilityError, LemmaBoundViolation, ModelError, SingularityError
from .levy_core import covariance_matrix, structural_upsilon, upsilon_infinity
from .levy_core.sampling import write_csv, read_csv
from .linear_sde import gain_normalizer

VARIANTS = ("standard", "limiting", "linear-degenerate")
CONVENTIONS = ("intensity", "cumulative")
EIG_FLOOR = 1e-12
BLOWUP = 1e12
DEFAULT_LADDER = (1e8, 1e10, 1e12, 1e14, 1e16)


def _sym_inv(m, what, t):
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if w.min() < EIG_FLOOR:
        raise SingularityError(f"{what} has eigenvalue {w.min():.3e} below {EIG_FLOOR:g} at t={t:g}")
    return (v / w) @ v.T


def _whitened(model, t):
    """``M(t) = G(t) D(t)``."""
    return gain_normalizer(model, t) @ model.D(t)


def noise_intensity(model, noise_cov, t):
    """``G D Lambda2 D^T G^T`` at time ``t``, i.e. ``d Sigma2 / dt``."""
    M = _whitened(model, t)
    return M @ noise_cov @ M.T


def _midpoints(t, dt):
    m = max(1, int(math.ceil(t / dt - 1e-9)))
    h = t / m
    return (np.arange(m) + 0.5) * h, h


def sigma2(model, noise_cov, t, dt=None):
    """``Sigma2(t) = int_0^t G D Lambda2 D^T G^T dr`` by the composite midpoint rule.

    When ``D`` is constant or a constant matrix times a scalar function the
    integrand is constant and the result is exactly ``t`` times it.  For
    tabulated ``D`` a step ``dt`` is required.
    """
    if t < 0:
        raise DomainError(f"Sigma2 is defined for t >= 0, got {t}")
    noise_cov = np.atleast_2d(noise_cov)
    if model.D.is_scaled:
        return t * noise_intensity(model, noise_cov, 0.0 if model.D.is_constant else max(t, 1e-300))
    if dt is None:
        raise ValueError("time-varying D needs a quadrature step dt")
    if t == 0:
        return np.zeros((model.d2, model.d2))
    mids, h = _midpoints(t, dt)
    return h * sum(noise_intensity(model, noise_cov, r) for r in mids)


@dataclass(eq=False)
class NoiseNormalization:
    """Weighting ``Xi(t)`` entering the Riccati equation and the filter gain.

    ``kind`` is one of ``standard``, ``limiting`` or ``linear-degenerate``.
    ``sigma2`` is the covariance rule of the normalised innovations (absent
    for limits).  ``ladder`` holds the uniform-convergence diagnostic
    ``(cutoff, sup_t ||G^T (Xi_n - Phi) G||)`` when a limit was built from
    a cutoff ladder.
    """

    kind: str
    weight: object
    convention: str = "intensity"
    cutoff: float | None = None
    sigma2: object = None
    is_zero: bool = False
    singular_at_zero: bool = False
    ladder: list = field(default_factory=list)
    upsilon: object = None

    def __call__(self, t):
        return self.weight(t)


def _weight_zero(d2):
    z = np.zeros((d2, d2))
    return lambda t: z


def degenerate_normalization(model):
    return NoiseNormalization("linear-degenerate", _weight_zero(model.d2), is_zero=True)


def standard_normalization(model, cutoff=math.inf, convention="intensity", dt=None):
    """``Xi = Sigma2^(n)(t)^{-1}`` (cumulative) or its rate form (intensity) for truncation level ``cutoff``."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    lam2 = covariance_matrix(model.observation_noise, cutoff=cutoff)
    s2 = lambda t: sigma2(model, lam2, t, dt)
    if convention == "intensity":
        const = _sym_inv(noise_intensity(model, lam2, 0.0), "G D Lambda2 D^T G^T", 0.0) if model.D.is_scaled else None
        weight = (lambda t: const) if const is not None else \
            (lambda t: _sym_inv(noise_intensity(model, lam2, t), "G D Lambda2 D^T G^T", t))
        return NoiseNormalization("standard", weight, convention, cutoff, s2)
    return NoiseNormalization("standard", lambda t: _sym_inv(s2(t), "Sigma2", t), convention, cutoff, s2,
                              singular_at_zero=True)


def _limit_inverse(K, P, scale):
    """``lim_{s->inf} (K + s P)^{-1}`` for symmetric psd ``P``: ``V (V^T K V)^{-1} V^T`` on ``ker P``."""
    w, v = np.linalg.eigh(0.5 * (P + P.T))
    null = v[:, w <= 1e-10 * max(scale, 1e-300)]
    if null.shape[1] == 0:
        return np.zeros_like(K)
    inner = null.T @ K @ null
    return null @ _sym_inv(inner, "finite-variance block of the observation noise", math.nan) @ null.T


def _phi_rule(model, convention, dt):
    noise = model.observation_noise
    q = noise.q_set
    psi = noise.jump_second_moments(math.inf)
    psi[q] = 0.0
    fixed = noise.gaussian_cov + np.diag(psi)
    upsilon = structural_upsilon(noise)

    def intensity_limit(t):
        D = model.D(t)
        if D.shape[0] == D.shape[1]:
            M_inv = np.linalg.inv(_whitened(model, t))
            return M_inv.T @ upsilon @ M_inv
        M = _whitened(model, t)
        growing = sum(np.outer(M[:, i], M[:, i]) for i in q)
        return _limit_inverse(M @ fixed @ M.T, growing, np.abs(M).max() ** 2)

    if convention == "intensity":
        if model.D.is_scaled:
            const = intensity_limit(0.0 if model.D.is_constant else 1.0)
            return (lambda t: const), upsilon
        return intensity_limit, upsilon

    def cumulative_limit(t):
        if t <= 0:
            raise DomainError("the cumulative limit Phi(t) is singular at t = 0")
        if model.D.is_scaled:
            return intensity_limit(t) / t
        mids, h = _midpoints(t, dt)
        Ms = [_whitened(model, r) for r in mids]
        K = h * sum(M @ fixed @ M.T for M in Ms)
        P = h * sum(np.outer(M[:, i], M[:, i]) for M in Ms for i in q)
        return _limit_inverse(K, P, np.abs(P).max())

    return cumulative_limit, upsilon


def phi_limit(model, cutoffs=None, grid=None, convention="intensity", tol=1e-4):
    """Limit ``Phi(t)`` of the standard weighting as the truncation level grows.

    If every observation-noise axis has infinite variance, ``Phi = 0``.  If
    none does, ``Phi`` is the untruncated standard weighting.  In the mixed
    case the exact limit follows from the axis-aligned structure: the
    infinite-variance directions are projected out and the remaining block
    is inverted (for square invertible ``D`` this is
    ``(G D)^{-T} Upsilon_inf (G D)^{-1}``, divided by ``t`` in the
    cumulative convention).

    When a ``grid`` is given, the uniform-convergence diagnostic
    ``sup_t ||G^T (Xi_n(t) - Phi(t)) G||`` is evaluated on grid points
    ``t > 0`` along the cutoff ladder.  In the mixed case a ladder whose
    last two iterates differ by more than ``tol`` raises
    :class:`ConvergenceError`.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    noise = model.observation_noise
    dt = grid.dt if grid is not None else None
    if noise.square_integrable:
        norm = standard_normalization(model, math.inf, convention, dt)
        norm.kind = "limiting"
        return norm
    if noise.fully_infinite_variance:
        norm = NoiseNormalization("limiting", _weight_zero(model.d2), convention, is_zero=True)
        rule = norm.weight
        upsilon = None
    else:
        rule, upsilon = _phi_rule(model, convention, dt)
        norm = NoiseNormalization("limiting", rule, convention, singular_at_zero=(convention == "cumulative"),
                                  upsilon=upsilon)
    if grid is None:
        return norm
    cutoffs = DEFAULT_LADDER if cutoffs is None else cutoffs
    times = grid.times[1:]
    G = [gain_normalizer(model, t) for t in times]
    phis = [rule(t) for t in times]
    previous = None
    for n in cutoffs:
        std = standard_normalization(model, float(n), convention, dt)
        iterate = [g.T @ std(t) @ g for g, t in zip(G, times)]
        sup_gap = max(np.linalg.norm(x - g.T @ p @ g, 2) for x, g, p in zip(iterate, G, phis))
        step = math.nan if previous is None else max(np.abs(a - b).max() for a, b in zip(iterate, previous))
        norm.ladder.append((float(n), float(sup_gap), float(step)))
        previous = iterate
    if not noise.fully_infinite_variance and len(norm.ladder) > 1 and norm.ladder[-1][2] > tol:
        raise ConvergenceError(f"G^T Sigma2^(n)^-1 G ladder not settled: last two iterates differ by "
                               f"{norm.ladder[-1][2]:.3e} > {tol:g}", diagnostics=norm.ladder)
    if len(cutoffs) >= 3:
        norm.upsilon = upsilon_infinity(noise, cutoffs)
    return norm


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RiccatiSolution:
    times: np.ndarray
    S: np.ndarray
    variant: str
    dt: float
    method: str = "rk4"
    convention: str = "intensity"
    cutoff: float | None = None
    start_index: int = 0
    max_asymmetry: float = 0.0

    def to_csv(self, path):
        """``t, s11, s12, ..., sdd`` (row-major), 17 significant digits."""
        d = self.S.shape[1]
        header = ["t"] + [f"s{i + 1}{j + 1}" for i in range(d) for j in range(d)]
        write_csv(path, header, np.column_stack([self.times, self.S.reshape(len(self.times), -1)]))

    @classmethod
    def from_csv(cls, path, variant="standard"):
        header, data = read_csv(path)
        d = int(round(math.sqrt(len(header) - 1)))
        t = data[:, 0]
        return cls(t, data[:, 1:].reshape(-1, d, d), variant, float(t[1] - t[0]))

    def norms(self):
        return np.linalg.norm(self.S, ord=2, axis=(1, 2))


def _variant_of(normalization):
    return normalization.kind


def solve_riccati(model, normalization, grid, variant=None):
    """Integrate the Riccati equation on ``grid`` with RK4, symmetrising each step.

    ``S(0)`` is ``model.initial_cov``.  Raises :class:`InstabilityError`
    when ``||S||`` exceeds 1e12.
    """
    kind = _variant_of(normalization)
    if variant is not None and variant != kind:
        raise ModelError(f"variant {variant!r} does not match {kind!r} normalisation")
    lam1 = model.system_covariance()
    dt = grid.dt
    quad = not normalization.is_zero

    def coeffs(t, linear=False):
        A = model.A(t)
        B = model.B(t)
        Q = B @ lam1 @ B.T
        if linear or not quad:
            return A, Q, None
        M = gain_normalizer(model, t) @ model.C(t)
        return A, Q, M.T @ normalization(t) @ M

    def rhs(t, S):
        A, Q, W = coeffs(t)
        out = A @ S + S @ A.T + Q
        if W is not None:
            out = out - S @ W @ S
        return out

    times = grid.times
    S = np.empty((times.size, model.d1, model.d1))
    S[0] = model.initial_cov
    start = 0
    worst = 0.0
    if normalization.singular_at_zero:
        A, Q, _ = coeffs(0.0, linear=True)
        S[1] = S[0] + dt * (A @ S[0] + S[0] @ A.T + Q)
        start = 1
    for k in range(start, grid.n_steps):
        t, s = times[k], S[k]
        k1 = rhs(t, s)
        k2 = rhs(t + 0.5 * dt, s + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, s + 0.5 * dt * k2)
        k4 = rhs(t + dt, s + dt * k3)
        new = s + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        scale = np.abs(new).max()
        if not np.isfinite(scale) or scale > BLOWUP:
            raise InstabilityError(f"Riccati solution blew up at t={times[k + 1]:g} (|S| = {scale:.3e})")
        if scale > 0:
            worst = max(worst, float(np.abs(new - new.T).max() / scale))
        S[k + 1] = 0.5 * (new + new.T)
    return RiccatiSolution(times.copy(), S, kind, dt, "rk4", normalization.convention, normalization.cutoff,
                           start, worst)


def system_second_moment(model, grid):
    """``E|Y(t)|^2`` on the grid from ``dM/dt = A M + M A^T + B Lambda1 B^T``, ``M(0) = Cov(Y0) + mu0 mu0^T``."""
    from dataclasses import replace

    shifted = replace(model, initial_cov=model.initial_cov + np.outer(model.initial_mean, model.initial_mean))
    M = solve_riccati(shifted, degenerate_normalization(model), grid).S
    return np.trace(M, axis1=1, axis2=2)


def check_lemma_bound(solution, model, grid=None, second_moment=None):
    """Assert ``||S_n(t)|| <= d1 E|Y(t)|^2`` at every grid point; returns the worst ratio."""
    if second_moment is None:
        from .levy_core import TimeGrid

        grid = grid or TimeGrid(float(solution.times[-1]), solution.dt, float(solution.times[0]))
        second_moment = system_second_moment(model, grid)
    bound = model.d1 * np.asarray(second_moment)
    norms = solution.norms()
    bad = norms > bound * (1 + 1e-10) + 1e-14
    if np.any(bad):
        k = int(np.argmax(bad))
        raise LemmaBoundViolation(f"||S(t)|| = {norms[k]:.6g} exceeds d1 E|Y(t)|^2 = {bound[k]:.6g} "
                                  f"at t = {solution.times[k]:g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, norms / bound, 0.0)
    return float(ratio.max())


@dataclass
class RiccatiStudy:
    cutoffs: np.ndarray
    gaps: np.ndarray
    limit: RiccatiSolution
    lemma_ratio: float

    def rows(self):
        return list(zip(self.cutoffs.tolist(), self.gaps.tolist()))

    def loglog_slope(self):
        return float(np.polyfit(np.log(self.cutoffs), np.log(self.gaps), 1)[0])

    def header(self):
        return ["cutoff", "sup_t ||S_n(t) - S_inf(t)||"]


def riccati_convergence_study(model, cutoffs, grid, convention="intensity", check_lemma=True):
    """``sup_t ||S_n(t) - S_inf(t)||`` along a cutoff ladder.

    Every ``S_n`` is checked against ``||S_n(t)|| <= d1 E|Y(t)|^2``; a
    violation raises :class:`LemmaBoundViolation`.
    """
    cutoffs = np.asarray(cutoffs, dtype=float)
    limit = solve_riccati(model, phi_limit(model, convention=convention), grid)
    second = system_second_moment(model, grid) if check_lemma else None
    gaps = []
    worst = 0.0
    for n in cutoffs:
        sol = solve_riccati(model, standard_normalization(model, n, convention, grid.dt), grid)
        if check_lemma:
            worst = max(worst, check_lemma_bound(sol, model, second_moment=second))
        gaps.append(float(np.linalg.norm(sol.S - limit.S, ord=2, axis=(1, 2)).max()))
    return RiccatiStudy(cutoffs, np.array(gaps), limit, worst)
