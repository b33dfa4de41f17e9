"""YAML run configuration shared by the command-line subcommands.

Every section is optional; missing fields take the defaults below.  The
resolved form (:meth:`RunConfig.resolved`) is itself a valid config, so a
run can be repeated from its own ``resolved_config.yaml``.

.. code-block:: yaml

    schema_version: 1
    seed: 12345
    grid: {T: 10.0, dt: 0.01}
    model:
      A: [[-1.0]]
      B: [[1.0]]
      C: [[1.0]]
      D: [[1.0]]                 # or {matrix: .., scalar: {kind: exp_decay, value: 1, rate: 0.1}}
                                 # or {table: d_table.csv, shape: [1, 1]}
      system_noise: {dimension: 1, gaussian_cov: [[1.0]]}
      observation_noise:
        dimension: 1
        jumps: [{kind: symmetric_stable, alpha: 1.5, scale: 1.0, axis: 0}]
      initial_mean: [0.0]
      initial_cov: [[0.0]]
    simulate: {n_paths: 1, cutoff: .inf}
    riccati: {variant: linear-degenerate, cutoff: .inf, convention: intensity}
    filter: {variant: limiting, cutoff: .inf, convention: intensity, n_paths: 1, export_gains: false}
    converge: {...}
    bench: {...}                 # ExperimentConfig fields
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, fields

import yaml

from .bench import ExperimentConfig
from .errors import ConfigError, LevyKalmanError
from .levy_core import LevyModel, TimeGrid
from .linear_sde import LinearModel, TimeMatrixFunction

SCHEMA_VERSION = 1

DEFAULT_MODEL = {
    "A": [[-1.0]],
    "B": [[1.0]],
    "C": [[1.0]],
    "D": [[1.0]],
    "system_noise": {"dimension": 1, "gaussian_cov": [[1.0]]},
    "observation_noise": {"dimension": 1,
                          "jumps": [{"kind": "symmetric_stable", "alpha": 1.5, "scale": 1.0, "axis": 0}]},
    "initial_mean": [0.0],
    "initial_cov": [[0.0]],
}

DEFAULTS = {
    "grid": {"T": 10.0, "dt": 0.01},
    "simulate": {"n_paths": 1, "cutoff": math.inf},
    "riccati": {"variant": "linear-degenerate", "cutoff": math.inf, "convention": "intensity"},
    "filter": {"variant": "limiting", "cutoff": math.inf, "convention": "intensity", "n_paths": 1,
               "export_gains": False},
    "converge": {
        "levy_cutoffs": [8.0, 16.0, 32.0, 64.0],
        "levy_replicates": 20000,
        "upsilon_cutoffs": [1e2, 1e3, 1e4, 1e5, 1e6],
        "riccati_cutoffs": [1e1, 1e2, 1e3, 1e4, 1e5],
        "filter_cutoffs": [1e1, 1e2, 1e3, 1e4],
        "filter_replicates": 1000,
        "convention": "intensity",
    },
}

SECTIONS = ("schema_version", "seed", "grid", "model", "simulate", "riccati", "filter", "converge", "bench")
FLOAT_FIELDS = {"cutoff", "T", "dt"}


def _float(value, where):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(where, f"expected a number, got {value!r}") from None


def _merge(section, given, defaults):
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(section, "expected a mapping")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}", f"unknown field; expected one of {sorted(defaults)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    for key in FLOAT_FIELDS & set(out):
        out[key] = _float(out[key], f"{section}.{key}")
    return out


def _build_model(data, base_dir):
    unknown = sorted(set(data) - set(DEFAULT_MODEL))
    if unknown:
        raise ConfigError(f"model.{unknown[0]}", "unknown field")
    merged = dict(DEFAULT_MODEL, **data)
    coeffs = {k: TimeMatrixFunction.from_dict(merged[k], f"model.{k}", base_dir) for k in "ABCD"}
    system = LevyModel.from_dict(merged["system_noise"], "model.system_noise")
    observation = LevyModel.from_dict(merged["observation_noise"], "model.observation_noise")
    try:
        return LinearModel(**coeffs, system_noise=system, observation_noise=observation,
                           initial_mean=merged["initial_mean"], initial_cov=merged["initial_cov"])
    except LevyKalmanError as exc:
        raise ConfigError("model", str(exc)) from None


def model_to_dict(model):
    return {
        "A": model.A.to_dict(), "B": model.B.to_dict(), "C": model.C.to_dict(), "D": model.D.to_dict(),
        "system_noise": model.system_noise.to_dict(),
        "observation_noise": model.observation_noise.to_dict(),
        "initial_mean": model.initial_mean.tolist(),
        "initial_cov": model.initial_cov.tolist(),
    }


def _bench(data, seed, replicates):
    known = {f.name for f in fields(ExperimentConfig)}
    data = dict(data or {})
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"bench.{unknown[0]}", f"unknown field; expected one of {sorted(known)}")
    if "cutoff" in data:
        data["cutoff"] = _float(data["cutoff"], "bench.cutoff")
    if seed is not None:
        data["root_seed"] = seed
    if replicates is not None:
        data["replicates"] = replicates
    try:
        return ExperimentConfig(**data)
    except ConfigError as exc:
        raise ConfigError(f"bench.{exc.path}", str(exc).split(": ", 1)[-1]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError("bench", str(exc)) from None


@dataclass
class RunConfig:
    schema_version: int
    seed: int
    grid: TimeGrid
    model: LinearModel
    simulate: dict
    riccati: dict
    filter: dict
    converge: dict
    bench: ExperimentConfig

    def resolved(self):
        """Plain-data form with every default filled in."""
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "grid": {"T": self.grid.T, "dt": self.grid.dt},
            "model": model_to_dict(self.model),
            "simulate": self.simulate,
            "riccati": self.riccati,
            "filter": self.filter,
            "converge": self.converge,
            "bench": {f.name: getattr(self.bench, f.name) for f in fields(ExperimentConfig)},
        }

    def dump(self):
        return yaml.safe_dump(self.resolved(), sort_keys=True, default_flow_style=None)


def parse_config(data, base_dir=None, seed=None, replicates=None):
    """Validate a config mapping; ``seed``/``replicates`` override the file."""
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(unknown[0], f"unknown section; expected one of {list(SECTIONS)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r} (this build reads {SCHEMA_VERSION})")
    root_seed = data.get("seed", 12345) if seed is None else seed
    if not isinstance(root_seed, int) or root_seed < 0:
        raise ConfigError("seed", "expected a nonnegative integer")
    g = _merge("grid", data.get("grid"), DEFAULTS["grid"])
    try:
        grid = TimeGrid(g["T"], g["dt"])
    except LevyKalmanError as exc:
        raise ConfigError("grid", str(exc)) from None
    model_data = data.get("model") or {}
    if not isinstance(model_data, dict):
        raise ConfigError("model", "expected a mapping")
    sections = {name: _merge(name, data.get(name), DEFAULTS[name])
                for name in ("simulate", "riccati", "filter", "converge")}
    for name in ("simulate", "filter"):
        if replicates is not None:
            sections[name]["n_paths"] = int(replicates)
    if replicates is not None:
        sections["converge"]["levy_replicates"] = int(replicates)
        sections["converge"]["filter_replicates"] = int(replicates)
    bench_data = data.get("bench")
    bench_seed = seed if seed is not None else (None if bench_data and "root_seed" in bench_data else root_seed)
    return RunConfig(version, root_seed, grid, _build_model(model_data, base_dir), sections["simulate"],
                     sections["riccati"], sections["filter"], sections["converge"],
                     _bench(bench_data, bench_seed, replicates))


def load_config(path=None, seed=None, replicates=None):
    if path is None:
        return parse_config({}, seed=seed, replicates=replicates)
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(data, os.path.dirname(os.path.abspath(path)), seed, replicates)
