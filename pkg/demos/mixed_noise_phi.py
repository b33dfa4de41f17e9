"""Limit of the inverse truncated covariance for mixed Gaussian and stable noise.

Two Brownian coordinates keep their unit weight while the two stable
coordinates are switched off as the cutoff grows.
"""

import numpy as np

from levy_kalman.levy_core import LevyModel, SymmetricStable, upsilon_infinity


def main():
    noise = LevyModel(4, np.diag([1.0, 1.0, 0.0, 0.0]),
                      (SymmetricStable(1.5, axis=2), SymmetricStable(1.5, axis=3)))
    ladder = [1e2, 1e3, 1e4, 1e5, 1e6]
    result = upsilon_infinity(noise, ladder)
    np.set_printoptions(precision=6, suppress=True)
    print("limit of inv(Lambda^(n)) along", ladder)
    print(result.limit)


if __name__ == "__main__":
    main()
