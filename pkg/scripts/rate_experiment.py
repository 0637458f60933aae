"""Tikhonov convergence slopes for source-condition densities ``phi^nu h``.

Compares several choices of ``h``: the constant function (the worst case the
rate bound is sharp for), and smooth decaying densities, for which the error
is of order ``lambda`` whatever ``nu`` is.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from weakmoments.kernel import GaussianKernel
from weakmoments.reconstruction import GridFunction, default_grid, rate_experiment

H_CHOICES = {
    "one": lambda x, s: np.ones_like(x),
    "normal": lambda x, s: np.exp(-x * x / 2) / np.sqrt(2 * np.pi),
    "cauchy": lambda x, s: 1 / (np.pi * (1 + x * x)),
    "slow": lambda x, s: 1 / np.sqrt(1 + (x / s) ** 2),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sigma", type=float, default=3.0)
    parser.add_argument("--nus", default="0.25,0.5,1,1.5,1.9,3")
    parser.add_argument("--lambdas", default="1e-6,1e-2", help="lower,upper lambda")
    parser.add_argument("--points", type=int, default=9)
    args = parser.parse_args(argv)

    k = GaussianKernel(args.sigma)
    lo, hi = (float(v) for v in args.lambdas.split(","))
    lambdas = np.logspace(np.log10(lo), np.log10(hi), args.points)
    grid = default_grid(k)
    nus = [float(v) for v in args.nus.split(",")]
    print("slope of log error against log lambda (target nu/2, capped at 1)")
    print(f"{'h':>8} " + " ".join(f"nu={nu:<6g}" for nu in nus))
    for name, fn in H_CHOICES.items():
        h = GridFunction.from_callable(lambda x: fn(x, args.sigma), grid)
        slopes = [rate_experiment(k, nu, lambdas, h).slope for nu in nus]
        print(f"{name:>8} " + " ".join(f"{s:<9.3f}" for s in slopes))
    return 0


if __name__ == "__main__":
    sys.exit(main())
