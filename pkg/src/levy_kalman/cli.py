"""Command-line entry point: ``levy-kalman simulate|riccati|filter|bench|converge``.

Every subcommand reads an optional YAML config, logs the resolved config,
writes it to ``<out>/resolved_config.yaml`` and then writes its CSV and
Markdown outputs to ``<out>``.  Outputs contain no timestamps, so equal
config and seed give byte-identical files.

Exit status: 0 on success, 2 for usage or config errors, 3 for numerical
failures (singular normalisations, unsettled ladders, blow-ups), 4 when the
error-matrix bound is violated.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import bench as bench_mod
from .config import load_config
from .errors import ConfigError, LemmaBoundViolation, LevyKalmanError
from .filtering import filter_convergence_study, prepare_filter, run_filter
from .levy_core import empirical_l1_convergence, upsilon_infinity
from .levy_core.sampling import write_csv
from .linear_sde import observation_l1_convergence, simulate_coupled_observations, simulate_observation, \
    simulate_system
from .riccati import check_lemma_bound, riccati_convergence_study, system_second_moment

log = logging.getLogger("levy_kalman")

COMMANDS = ("simulate", "riccati", "filter", "bench", "converge")


def _text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def markdown_table(header, rows):
    header = [h.replace("|", "\\|") for h in header]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(v if isinstance(v, str) else format(float(v), ".6g") for v in row) + " |")
    return "\n".join(lines) + "\n"


def _table(out, stem, header, rows):
    write_csv(os.path.join(out, stem + ".csv"), header, rows)
    _text(os.path.join(out, stem + ".md"), markdown_table(header, rows))


def _path_name(out, stem, i, n):
    return os.path.join(out, f"{stem}.csv" if n == 1 else f"{stem}_{i:04d}.csv")


def cmd_simulate(cfg, out, threads):
    sec = cfg.simulate
    n = int(sec["n_paths"])
    Y = simulate_system(cfg.model, cfg.grid, cfg.seed, n)
    cutoff = float(sec["cutoff"])
    Z = simulate_observation(cfg.model, Y, cfg.seed, cutoff=cutoff)
    for i in range(n):
        Y.to_csv(_path_name(out, "system", i, n), i, prefix="y")
        Z.to_csv(_path_name(out, "observation", i, n), i, prefix="z")


def cmd_riccati(cfg, out, threads):
    sec = cfg.riccati
    norm, sol = prepare_filter(cfg.model, cfg.grid, sec["variant"], float(sec["cutoff"]), sec["convention"])
    if sol.variant == "standard":
        ratio = check_lemma_bound(sol, cfg.model, second_moment=system_second_moment(cfg.model, cfg.grid))
        log.info("error-matrix bound holds (max ||S|| / (d1 E|Y|^2) = %.6g)", ratio)
    sol.to_csv(os.path.join(out, "riccati.csv"))


def cmd_filter(cfg, out, threads):
    sec = cfg.filter
    model, grid = cfg.model, cfg.grid
    n = int(sec["n_paths"])
    cutoff = float(sec["cutoff"])
    norm, sol = prepare_filter(model, grid, sec["variant"], cutoff, sec["convention"])
    Y = simulate_system(model, grid, cfg.seed, n)
    if sec["variant"] == "standard" and math.isfinite(cutoff):
        Z = simulate_coupled_observations(model, Y, cfg.seed, [cutoff])[cutoff]
    else:
        Z = simulate_observation(model, Y, cfg.seed)
    run = run_filter(model, Z, sol, norm, truth=Y, seed=cfg.seed)
    for i in range(n):
        run.to_csv(_path_name(out, "filter", i, n), i)
        Y.to_csv(_path_name(out, "system", i, n), i, prefix="y")
    if sec["export_gains"]:
        run.gains_to_csv(os.path.join(out, "gains.csv"))
    sol.to_csv(os.path.join(out, "riccati.csv"))
    mse = run.path_mse()
    write_csv(os.path.join(out, "path_mse.csv"), ["path", "path_mse"], np.column_stack([np.arange(n), mse]))


def cmd_bench(cfg, out, threads):
    config = cfg.bench
    if threads is not None:
        config.threads = threads
    report = bench_mod.run_benchmark(config)
    log.info("benchmark finished in %.1f s", report.runtime)
    _text(os.path.join(out, "report.md"), bench_mod.emit_table(report, "markdown"))
    _text(os.path.join(out, "report.csv"), bench_mod.emit_table(report, "csv"))
    _text(os.path.join(out, "statistics.csv"), bench_mod.statistics_csv(report))
    sys.stdout.write(bench_mod.emit_table(report, "markdown"))


def cmd_converge(cfg, out, threads):
    sec = cfg.converge
    model, grid, seed = cfg.model, cfg.grid, cfg.seed
    noise = model.observation_noise
    levy = empirical_l1_convergence(noise, sec["levy_cutoffs"], grid, int(sec["levy_replicates"]), seed)
    _table(out, "levy_l1", levy.header(), levy.rows())
    obs = observation_l1_convergence(model, sec["levy_cutoffs"], grid, int(sec["levy_replicates"]), seed)
    _table(out, "observation_l1", obs.header(), obs.rows())
    log.info("L1 slopes: noise %.4f, observation %.4f", levy.loglog_slope(), obs.loglog_slope())
    ups = upsilon_infinity(noise, sec["upsilon_cutoffs"])
    d = noise.dimension
    header = ["cutoff"] + [f"inv{i + 1}{j + 1}" for i in range(d) for j in range(d)] + ["step_change", "gap_to_limit"]
    rows = [[n] + list(inv.ravel()) + [step, gap]
            for (n, step, gap), inv in zip(ups.rows(), ups.inverses)]
    _table(out, "upsilon", header, rows)
    if not ups.converged:
        log.warning("Lambda^(n) inverse ladder has not settled (last change %.3e)", ups.differences[-1])
    ric = riccati_convergence_study(model, sec["riccati_cutoffs"], grid, sec["convention"])
    _table(out, "riccati_convergence", ric.header(), ric.rows())
    filt = filter_convergence_study(model, sec["filter_cutoffs"], grid, int(sec["filter_replicates"]), seed,
                                    sec["convention"])
    _table(out, "filter_convergence", filt.header()[:3], [r[:3] for r in filt.rows()])


HANDLERS = {"simulate": cmd_simulate, "riccati": cmd_riccati, "filter": cmd_filter, "bench": cmd_bench,
            "converge": cmd_converge}


def build_parser():
    parser = argparse.ArgumentParser(prog="levy-kalman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file (defaults are used when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--threads", type=int, help="worker threads (default: machine parallelism)")
        p.add_argument("--replicates", type=int, help="override replicate/path counts")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, seed=args.seed, replicates=args.replicates)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    os.makedirs(args.out, exist_ok=True)
    dumped = cfg.dump()
    log.info("resolved config (seed %d):\n%s", cfg.seed, dumped)
    _text(os.path.join(args.out, "resolved_config.yaml"), dumped)
    try:
        HANDLERS[args.command](cfg, args.out, args.threads)
    except LemmaBoundViolation as exc:
        log.error("error-matrix bound violated: %s", exc)
        return 4
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except LevyKalmanError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
