"""Large-sample limits of the estimators under the contaminated designs.

Solves the population estimating equations under the mixture law by
quadrature, with no sampling, so Monte Carlo bias can be compared with its
limit.  Weak moment functionals use the same moment sets and weighting as the
built-in studies; the two-step weight is the population
``(S + ridge I)^-1`` at the identity-weighted limit.
"""

from __future__ import annotations

import sys

import numpy as np
from scipy import integrate, optimize, stats

from weakmoments.kernel import GaussianKernel
from weakmoments.models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    ContaminatedModel,
    StudentTLocationScale,
)
from weakmoments.weakcore import MomentCondition, MomentSet, weak_expectations


def gmm_limit(cond: MomentCondition, law, theta0, ridge=None):
    """Population GMM solution under ``law``; identity weight, or two-step with ``ridge``."""
    stats_ = weak_expectations(law, cond.kernel, cond.extended)

    def fit(weight, start):
        root = np.linalg.cholesky(weight).T
        return optimize.least_squares(lambda th: root @ cond.mean_score(stats_, th), start, xtol=1e-14, ftol=1e-14).x

    theta = fit(np.eye(cond.n_moments), np.asarray(theta0, float))
    if ridge is not None:
        s = cond.score_covariance(theta, model=law)
        theta = fit(np.linalg.inv(s + ridge * np.eye(cond.n_moments)), theta)
    return theta


def cauchy_mle_limit(law) -> float:
    def score(mu):
        g = lambda x: 2 * (x - mu) / (1 + (x - mu) ** 2) * law.density(np.array([x]))[0]
        return sum(integrate.quad(g, a, b, limit=500)[0] for a, b in [(-np.inf, -60), (-60, 60), (60, np.inf)])

    return optimize.brentq(score, 0.0, 5.0)


def main() -> int:
    k1, k2 = GaussianKernel(3.0), GaussianKernel(3.0, 2)
    j1, j12 = MomentSet.powers([1]), MomentSet.powers([1, 2])

    cauchy = ContaminatedModel(CauchyLocation(2.0), CauchyLocation(7.0), 0.1)
    print("Cauchy location, eps = 0.1, delta = 5 (target mu = 2)")
    for label, cond, ridge in [
        ("WM raw j=1", MomentCondition(CauchyLocation(), k1, j1), None),
        ("WM normalised j=1", MomentCondition(CauchyLocation(), k1, j1, True), None),
        ("GMM-I raw {1,2}", MomentCondition(CauchyLocation(), k1, j12), None),
        ("GMM-2S raw {1,2}", MomentCondition(CauchyLocation(), k1, j12), 0.1),
        ("GMM-2S normalised {1,2}", MomentCondition(CauchyLocation(), k1, j12, True), 0.1),
    ]:
        print(f"  {label:26s} bias {gmm_limit(cond, cauchy, [2.0], ridge)[0] - 2:+.4f}")
    print(f"  {'MLE':26s} bias {cauchy_mle_limit(cauchy) - 2:+.4f}")
    med = optimize.brentq(lambda m: 0.9 * stats.cauchy.cdf(m, 2) + 0.1 * stats.cauchy.cdf(m, 7) - 0.5, 0, 5)
    print(f"  {'Median':26s} bias {med - 2:+.4f}")

    c2 = ContaminatedModel(BivariateCauchyLocation((1.0, 1.0)), BivariateCauchyLocation((6.0, 6.0)), 0.1)
    print("Bivariate Cauchy, eps = 0.1, shift (5, 5) (target mu = (1, 1))")
    for label, normalized in [("WM raw", False), ("WM normalised", True)]:
        cond = MomentCondition(BivariateCauchyLocation(), k2, MomentSet.parse("1:0,0:1"), normalized)
        th = gmm_limit(cond, c2, [1.0, 1.0])
        print(f"  {label:26s} |bias| {np.linalg.norm(th - 1):.4f}")

    t3 = ContaminatedModel(StudentTLocationScale(0, 1), StudentTLocationScale(0, 5), 0.1)
    print("Student t3, eps = 0.1, scale 5 contamination (target s = 1)")
    for label, normalized in [("GMM-2S raw {1,2}", False), ("GMM-2S normalised {1,2}", True)]:
        cond = MomentCondition(StudentTLocationScale(), k1, j12, normalized)
        print(f"  {label:26s} s bias {gmm_limit(cond, t3, [0.0, 1.0], 0.1)[1] - 1:+.4f}")

    b3 = ContaminatedModel(BivariateT3LocationScale((0, 0), 1), BivariateT3LocationScale((0, 0), 5), 0.1)
    print("Bivariate t3, eps = 0.1, scale 5 contamination (target s = 1)")
    for label, normalized in [("GMM-2S raw", False), ("GMM-2S normalised", True)]:
        cond = MomentCondition(BivariateT3LocationScale(), k2, MomentSet.parse("1:0,0:1,r2"), normalized)
        print(f"  {label:26s} s bias {gmm_limit(cond, b3, [0.0, 0.0, 1.0], 0.1)[2] - 1:+.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
