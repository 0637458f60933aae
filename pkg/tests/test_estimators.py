from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakmoments import estimators as est
from weakmoments.estimators import (
    EstimatorConfig,
    IdentifiabilityError,
    WeightingScheme,
    estimate,
    mad_scale,
    spatial_median,
)
from weakmoments.kernel import GaussianKernel
from weakmoments.models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    ContaminatedModel,
    StudentTLocationScale,
)
from weakmoments.weakcore import MomentSet, theoretical_weak_cf

K3 = GaussianKernel(3.0)
samples = st.lists(st.floats(-100, 100), min_size=3, max_size=60)


def wm(**kw):
    kw.setdefault("moments", MomentSet.powers([1]))
    return EstimatorConfig("wm", **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig("nope")
    with pytest.raises(ValueError):
        EstimatorConfig("wm")
    with pytest.raises(ValueError):
        EstimatorConfig("wm", family=StudentTLocationScale(), moments=MomentSet.powers([1]))
    with pytest.raises(ValueError):
        EstimatorConfig("median", tol=0)
    with pytest.raises(ValueError):
        WeightingScheme("optimal")
    with pytest.raises(ValueError):
        WeightingScheme("twostep", -1.0)


def test_median_of_three():
    assert estimate([1.0, 2.0, 3.0], EstimatorConfig("median")).theta[0] == 2.0


def test_mad_scale_normal_consistency():
    x = np.random.default_rng(0).standard_normal(200_000)
    assert mad_scale(x) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("normalized", [False, True])
def test_fixed_point_at_exact_moments(normalized):
    cfg = wm(normalized=normalized)
    cond = est.moment_condition(cfg)
    stats = np.concatenate([[1.0], cond.population([2.0])]) if normalized else np.concatenate([[0.0], cond.population([2.0])])
    if normalized:
        # (m0, m1) from the model itself
        from weakmoments.weakcore import weak_expectations

        stats = weak_expectations(CauchyLocation(2.0), K3, cond.extended)
    fit = est._fit_moments(cond, stats, np.array([1.0]), np.eye(1), np.array([-10.0]), np.array([10.0]), cfg)
    assert fit.converged
    assert fit.theta[0] == pytest.approx(2.0, abs=1e-9)


def test_exact_cf_fixed_point(monkeypatch):
    cfg = EstimatorConfig("cf", start=(1.0,))
    monkeypatch.setattr(est, "empirical_weak_cf", lambda data, kernel, t: theoretical_weak_cf(CauchyLocation(2.0), kernel, t))
    res = estimate(np.zeros(5), cfg)
    assert res.theta[0] == pytest.approx(2.0, abs=1e-7)


def test_just_identified_residual_within_tol():
    x = CauchyLocation(2.0).sample(500, 4)
    cfg = wm()
    res = estimate(x, cfg)
    assert res.converged
    cond = est.moment_condition(cfg)
    assert np.linalg.norm(cond.mean_score(cond.sufficient(x), res.theta)) <= cfg.tol
    assert res.std_errors[0] > 0


def test_sampling_accuracy():
    x = CauchyLocation(2.0).sample(1000, 21)
    for cfg in (
        wm(),
        wm(normalized=True),
        EstimatorConfig("gmm", moments=MomentSet.powers([1, 2]), weighting=WeightingScheme("twostep")),
        EstimatorConfig("cf"),
        EstimatorConfig("mle"),
        EstimatorConfig("huber"),
        EstimatorConfig("tukey"),
    ):
        res = estimate(x, cfg)
        assert res.converged, cfg.method
        assert abs(res.theta[0] - 2.0) < 0.3, cfg.method


def test_location_scale_families():
    x = StudentTLocationScale(1.0, 2.0).sample(3000, 5)
    cfg = EstimatorConfig("gmm", family=StudentTLocationScale(), moments=MomentSet.powers([1, 2]), weighting=WeightingScheme("twostep"))
    res = estimate(x, cfg)
    assert res.converged
    np.testing.assert_allclose(res.theta, [1.0, 2.0], atol=0.2)
    mle = estimate(x, EstimatorConfig("mle", family=StudentTLocationScale()))
    np.testing.assert_allclose(mle.theta, [1.0, 2.0], atol=0.15)


def test_bivariate_families():
    x = BivariateCauchyLocation((1.0, 1.0)).sample(1000, 8)
    res = estimate(x, wm(family=BivariateCauchyLocation(), moments=MomentSet.parse("1:0,0:1")))
    assert res.converged
    np.testing.assert_allclose(res.theta, [1.0, 1.0], atol=0.3)
    y = BivariateT3LocationScale((0.0, 0.0), 1.0).sample(2000, 9)
    cfg = EstimatorConfig(
        "gmm", family=BivariateT3LocationScale(), moments=MomentSet.parse("1:0,0:1,r2"), weighting=WeightingScheme("twostep")
    )
    res = estimate(y, cfg)
    assert res.converged
    np.testing.assert_allclose(res.theta, [0.0, 0.0, 1.0], atol=0.15)


def test_two_step_objective_not_increasing():
    x = CauchyLocation(2.0).sample(800, 13)
    cfg = EstimatorConfig("gmm", moments=MomentSet.powers([1, 2]), weighting=WeightingScheme("twostep"))
    cond = est.moment_condition(cfg)
    stats = cond.sufficient(x)
    first = estimate(x, EstimatorConfig("gmm", moments=MomentSet.powers([1, 2])))
    sc = cond.scores(x, first.theta)
    w2 = np.linalg.inv(sc.T @ sc / len(x) + 0.1 * np.eye(2))
    final = estimate(x, cfg)

    def q(theta):
        r = cond.mean_score(stats, theta)
        return float(r @ w2 @ r)

    assert 0.0 <= q(final.theta) <= q(first.theta) + 1e-15
    assert final.objective >= 0


def test_large_ridge_approaches_identity_weighting():
    x = CauchyLocation(2.0).sample(800, 14)
    gmm_i = estimate(x, EstimatorConfig("gmm", moments=MomentSet.powers([1, 2])))
    big = estimate(x, EstimatorConfig("gmm", moments=MomentSet.powers([1, 2]), weighting=WeightingScheme("twostep", 1e8)))
    assert big.theta[0] == pytest.approx(gmm_i.theta[0], abs=1e-6)


def test_zero_contamination_matches_clean_run():
    base = CauchyLocation(2.0)
    mix = ContaminatedModel(base, CauchyLocation(7.0), 0.0)
    for cfg in (wm(), EstimatorConfig("median"), EstimatorConfig("mle")):
        a = estimate(base.sample(300, 3), cfg).theta
        b = estimate(mix.sample(300, 3), cfg).theta
        np.testing.assert_array_equal(a, b)


@given(samples)
def test_huber_with_huge_k_is_mean(xs):
    x = np.array(xs)
    if mad_scale(x) == 0:
        return
    res = estimate(x, EstimatorConfig("huber", tuning=np.inf))
    assert res.theta[0] == pytest.approx(np.mean(x), abs=1e-8)


@given(samples)
def test_tukey_with_huge_c_is_mean(xs):
    x = np.array(xs)
    if mad_scale(x) == 0:
        return
    res = estimate(x, EstimatorConfig("tukey", tuning=np.inf))
    assert res.theta[0] == pytest.approx(np.mean(x), abs=1e-8)


@given(samples, st.floats(-50, 50))
def test_median_translation_equivariance(xs, c):
    x = np.array(xs)
    a = estimate(x + c, EstimatorConfig("median")).theta[0]
    assert a == pytest.approx(np.median(x) + c, abs=1e-9)


def test_spatial_median_is_geometric_median():
    x = BivariateCauchyLocation((1.0, -1.0)).sample(400, 2)
    y, conv, _ = spatial_median(x)
    assert conv
    grad = np.sum((x - y) / np.linalg.norm(x - y, axis=1)[:, None], axis=0)
    assert np.linalg.norm(grad) < 1e-6


def test_meansd():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    res = estimate(x, EstimatorConfig("meansd", family=StudentTLocationScale()))
    np.testing.assert_allclose(res.theta, [2.5, np.std(x, ddof=1)])


def test_cauchy_mle_is_score_root():
    x = CauchyLocation(2.0).sample(500, 17)
    mu = estimate(x, EstimatorConfig("mle")).theta[0]
    u = x - mu
    assert abs(np.sum(2 * u / (1 + u * u))) < 1e-6


def test_identifiability_error():
    # a symmetric even moment carries no information on the location at mu = 0
    x = np.linspace(-3, 3, 101)
    with pytest.raises(IdentifiabilityError):
        estimate(x, wm(moments=MomentSet.powers([2]), start=(0.0,)))


def test_non_convergence_is_reported():
    x = CauchyLocation(2.0).sample(200, 1)
    res = estimate(x, wm(max_iter=1, tol=1e-300))
    assert not res.converged
    assert res.message
