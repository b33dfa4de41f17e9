"""Monte-Carlo comparison of filters for an Ornstein-Uhlenbeck signal seen through stable noise.

The signal is ``dY = -Y dt + dW`` with ``Y(0) = mu0`` and the observations
are ``dZ = Y dt + D dL`` where ``L`` is symmetric alpha-stable with
characteristic function ``exp(-t |u|^alpha)`` (or Brownian, for sanity
runs).  For every replicate the path error ``(1/(N+1)) sum_k |Y(t_k) -
Yhat(t_k)|^2`` over all grid points is collected, and the replicate values
are reduced to several summary statistics.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, RegimeError, RegistrationError
from .filtering import prepare_filter, run_filter
from .levy_core import LevyModel, TimeGrid
from .linear_sde import LinearModel, simulate_coupled_observations, simulate_observation, simulate_system

log = logging.getLogger(__name__)

BUILTIN_VARIANTS = ("linear-degenerate", "limiting", "standard")
ALIASES = {"degenerate": "linear-degenerate", "no-filter": "linear-degenerate"}
STATISTICS = ("median-of-path-MSE", "mean-of-path-MSE", "median-of-path-RMSE", "mean-of-terminal-SE")
NOISE_KINDS = ("stable", "gaussian")

_COMPETITORS = {}


def register_competitor(name, hook):
    """Add a filter column to subsequent reports.

    ``hook(observations, config, model)`` receives the observation
    :class:`~levy_kalman.levy_core.PathGrid` for a chunk of replicates and
    returns estimates of shape (paths, steps + 1) or (paths, steps + 1, 1).
    """
    if name in _COMPETITORS or name in BUILTIN_VARIANTS or name in ALIASES:
        raise RegistrationError(f"competitor {name!r} is already registered")
    if not callable(hook):
        raise TypeError("hook must be callable")
    _COMPETITORS[name] = hook


def unregister_competitor(name):
    _COMPETITORS.pop(name, None)


def competitors():
    return dict(_COMPETITORS)


@dataclass
class ExperimentConfig:
    """Benchmark settings; defaults reproduce the desk-scale No-Filter study."""

    alphas: list = field(default_factory=lambda: [1.1, 1.5, 1.9])
    dt: float = 0.01
    T: float = 10.0
    replicates: int = 10_000
    root_seed: int = 20240611
    variants: list = field(default_factory=lambda: ["linear-degenerate"])
    statistic: str = "median-of-path-MSE"
    mean_reversion: float = 1.0
    mu0: float = 0.0
    observation_noise: str = "stable"
    noise_scale: float = 1.0
    observation_scale: float = 1.0
    cutoff: float = math.inf
    chunk: int = 1000
    threads: int | None = None

    def __post_init__(self):
        self.alphas = [float(a) for a in self.alphas]
        self.variants = [ALIASES.get(v, v) for v in self.variants]
        if self.statistic not in STATISTICS:
            raise ConfigError("statistic", f"must be one of {STATISTICS}")
        if self.observation_noise not in NOISE_KINDS:
            raise ConfigError("observation_noise", f"must be one of {NOISE_KINDS}")
        if self.replicates < 100:
            raise ConfigError("replicates", "need at least 100 replicates")
        if self.observation_noise == "stable":
            for a in self.alphas:
                if not 1.0 < a < 2.0:
                    raise RegimeError(f"alpha = {a} outside (1, 2)")

    @property
    def grid(self):
        return TimeGrid(self.T, self.dt)

    def model(self, alpha):
        """Scalar OU model for one alpha row."""
        if self.observation_noise == "stable":
            noise = LevyModel.stable(alpha, self.noise_scale)
        else:
            noise = LevyModel.brownian([[self.noise_scale ** 2]])
        return LinearModel.scalar_ou(noise, self.mean_reversion, self.mu0, 0.0, D=self.observation_scale)

    def to_dict(self):
        out = asdict(self)
        out["cutoff"] = "inf" if math.isinf(self.cutoff) else self.cutoff
        return out


@dataclass
class BenchRow:
    alpha: float
    variant: str
    statistics: dict
    replicates: int
    seed: int


@dataclass
class BenchReport:
    """Per (alpha, variant) statistics with standard errors.  ``runtime`` is never written to tables."""

    config: ExperimentConfig
    columns: list
    rows: list
    runtime: float = 0.0

    def value(self, alpha, variant, statistic=None):
        statistic = statistic or self.config.statistic
        for r in self.rows:
            if r.alpha == alpha and r.variant == variant:
                return r.statistics[statistic]
        raise KeyError((alpha, variant))


def median_with_se(values):
    """Sample median and its standard error from the order-statistic interval ``q(1/2 +- 1/(2 sqrt R))``."""
    values = np.asarray(values)
    half = 0.5 / math.sqrt(values.size)
    lo, mid, hi = np.quantile(values, [0.5 - half, 0.5, 0.5 + half])
    return float(mid), float(hi - lo) / 2.0


def mean_with_se(values):
    values = np.asarray(values)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def summarize(path_mse, terminal_se):
    return {
        "median-of-path-MSE": median_with_se(path_mse),
        "mean-of-path-MSE": mean_with_se(path_mse),
        "median-of-path-RMSE": median_with_se(np.sqrt(path_mse)),
        "mean-of-terminal-SE": mean_with_se(terminal_se),
    }


def row_seed(root_seed, index):
    """Independent 63-bit seed for alpha row ``index``."""
    state = np.random.SeedSequence(int(root_seed), spawn_key=(int(index),)).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def _errors(truth, estimate):
    est = np.asarray(estimate)
    if est.ndim == 2:
        est = est[:, :, None]
    e = truth.values - est
    return np.mean(np.sum(e ** 2, axis=2), axis=1), np.sum(e[:, -1] ** 2, axis=1)


def _run_chunk(config, model, grid, seed, prepared, columns, lo, k):
    Y = simulate_system(model, grid, seed, k, first_path=lo)
    observations = {}

    def obs(cutoff):
        if cutoff not in observations:
            if math.isinf(cutoff):
                observations[cutoff] = simulate_observation(model, Y, seed, first_path=lo)
            else:
                observations.update(simulate_coupled_observations(model, Y, seed, [cutoff], first_path=lo))
        return observations[cutoff]

    out = {}
    for name in columns:
        if name == "linear-degenerate":
            norm, sol = prepared[name]
            est = run_filter(model, _zero_observations(grid, k, model), sol, norm).estimate
        elif name in prepared:
            norm, sol = prepared[name]
            cutoff = config.cutoff if name == "standard" else math.inf
            est = run_filter(model, obs(cutoff), sol, norm).estimate
        else:
            est = _COMPETITORS[name](obs(math.inf), config, model)
        out[name] = _errors(Y, est)
    return out


def _zero_observations(grid, k, model):
    # the degenerate filter has zero gain, so its input never matters
    from .levy_core import PathGrid

    return PathGrid(grid, np.zeros((k, grid.n_steps, model.d2)), 0)


def run_benchmark(config):
    """Run every column for every alpha; replicate chunks execute on a thread pool.

    Replicate ``i`` of alpha row ``a`` always uses seed ``row_seed(root_seed, a)``
    and replicate index ``i``, so results do not depend on chunking or thread count.
    """
    start = time.perf_counter()
    columns = list(config.variants) + [c for c in _COMPETITORS if c not in config.variants]
    grid = config.grid
    rows = []
    for a_index, alpha in enumerate(config.alphas):
        model = config.model(alpha)
        seed = row_seed(config.root_seed, a_index)
        prepared = {}
        for name in columns:
            if name in BUILTIN_VARIANTS:
                prepared[name] = prepare_filter(model, grid, name, cutoff=config.cutoff)
            elif name not in _COMPETITORS:
                raise ConfigError("variants", f"unknown filter {name!r}")
        bounds = [(lo, min(config.chunk, config.replicates - lo)) for lo in range(0, config.replicates, config.chunk)]
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(lambda b: _run_chunk(config, model, grid, seed, prepared, columns, *b), bounds))
        for name in columns:
            path_mse = np.concatenate([p[name][0] for p in parts])
            terminal = np.concatenate([p[name][1] for p in parts])
            rows.append(BenchRow(alpha, name, summarize(path_mse, terminal), config.replicates, seed))
        log.info("alpha=%g done", alpha)
    return BenchReport(config, columns, rows, time.perf_counter() - start)


def _cell(value_se):
    value, se = value_se
    return f"{value:.4f} ({se:.4f})"


def emit_table(report, fmt="markdown", statistic=None):
    """Rows per alpha, one column per filter, ``value (standard error)`` to 4 decimals."""
    statistic = statistic or report.config.statistic
    header = ["alpha"] + list(report.columns)
    body = []
    for alpha in report.config.alphas:
        body.append([f"{alpha:g}"] + [_cell(report.value(alpha, c, statistic)) for c in report.columns])
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        if report.columns:
            writer.writerows(body)
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    if report.columns:
        lines += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(lines) + "\n"


def statistics_csv(report):
    """Every statistic for every (alpha, filter) at full precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "filter", "statistic", "value", "std_error", "replicates", "seed"])
    for r in report.rows:
        for name, (v, se) in r.statistics.items():
            writer.writerow([format(r.alpha, ".17g"), r.variant, name, format(v, ".17g"), format(se, ".17g"),
                             r.replicates, r.seed])
    return buf.getvalue()


def discrete_kalman_filter(observations, model, measurement_var=None):
    """Discrete-time Kalman filter for a scalar constant-coefficient model on observation increments.

    The state transition is the exact ``exp(A dt)`` with matching process
    noise; measurements are ``dZ_k / dt = C Y_k + v_k`` with
    ``Var v_k = D^2 Lambda2 / dt`` (pass ``measurement_var`` to override,
    e.g. 0 for noiseless observations).  Returns the one-step predictor
    ``Yhat(t_k)`` given increments before ``t_k``, shape (paths, steps + 1).
    """
    dt = observations.dt
    a = float(model.A(0.0)[0, 0])
    c = float(model.C(0.0)[0, 0])
    q = float((model.B(0.0) @ model.system_covariance() @ model.B(0.0).T)[0, 0])
    if measurement_var is None:
        lam2 = float(np.atleast_2d(model.observation_noise.gaussian_cov)[0, 0])
        measurement_var = float(model.D(0.0)[0, 0]) ** 2 * lam2 / dt
    F = math.exp(a * dt)
    Q = q * dt if a == 0 else q * (math.exp(2 * a * dt) - 1.0) / (2 * a)
    dZ = observations.increments[:, :, 0]
    x = np.full(dZ.shape[0], float(model.initial_mean[0]))
    P = float(model.initial_cov[0, 0])
    out = np.empty((dZ.shape[0], dZ.shape[1] + 1))
    out[:, 0] = x
    for k in range(dZ.shape[1]):
        innov_var = c * P * c + measurement_var
        g = F * P * c / innov_var if innov_var > 0 else 0.0
        x = F * x + g * (dZ[:, k] / dt - c * x)
        P = F * P * F + Q - g * c * P * F
        out[:, k + 1] = x
    return out
