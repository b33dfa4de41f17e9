"""Scalar OU state observed through stable noise: the degenerate filter.

With zero initial mean the degenerate filter returns zero for every path,
so its path-MSE is the time-averaged OU variance. The script prints the
benchmark table and the analytic value for comparison.
"""

import math

from levy_kalman.bench import ExperimentConfig, emit_table, run_benchmark


def main():
    cfg = ExperimentConfig(alphas=[1.1, 1.5, 1.9], replicates=2000)
    report = run_benchmark(cfg)
    for stat in ("median-of-path-MSE", "mean-of-path-MSE", "median-of-path-RMSE"):
        print(stat)
        print(emit_table(report, statistic=stat))
        print()
    exact = 0.5 - (1 - math.exp(-2 * cfg.T)) / (4 * cfg.T)
    print(f"analytic mean path-MSE: {exact:.4f}")


if __name__ == "__main__":
    main()
