from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakmoments.kernel import GaussianKernel
from weakmoments.models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    ContaminatedModel,
    StudentTLocationScale,
)
from weakmoments.weakcore import (
    MomentCondition,
    MomentIndex,
    MomentSet,
    empirical_weak_cf,
    empirical_weak_expectation,
    empirical_weak_moments,
    moments_from_cumulants,
    normalized_moment,
    theoretical_weak_cf,
    theoretical_weak_moment,
    weak_cgf,
    weak_cumulants,
    weak_expectations,
)

K3 = GaussianKernel(3.0)
P = MomentIndex.power
# independent scipy quad / wofz oracle values
CAUCHY2_M0 = 0.6590330537068294
CAUCHY2_M1 = 0.9997906105357708
BIVARIATE_CAUCHY0_M0 = 0.6736815407861656


def test_moment_index_parsing():
    assert MomentIndex.parse("2") == P(2)
    assert MomentIndex.parse("1:0") == MomentIndex.multi(1, 0)
    assert MomentIndex.parse("r2") == MomentIndex.radial2()
    assert str(MomentSet.parse("1:0,0:1,r2")) == "1:0,0:1,r2"
    with pytest.raises(ValueError):
        MomentIndex.parse("x")
    with pytest.raises(ValueError):
        MomentIndex.power(-1)
    with pytest.raises(ValueError):
        MomentSet.powers([1, 1])


def test_moment_index_dimension_check():
    with pytest.raises(ValueError):
        theoretical_weak_moment(CauchyLocation(0.0), K3, MomentIndex.multi(1, 0))


def test_symmetric_moments_vanish():
    assert theoretical_weak_moment(CauchyLocation(0.0), K3, P(1)) == pytest.approx(0.0, abs=1e-15)
    assert theoretical_weak_moment(BivariateCauchyLocation((0, 0)), K3, MomentIndex.multi(1, 0)) == pytest.approx(0.0, abs=1e-15)


def test_cauchy_m0_dual_route_anchor():
    for method in ("rule", "adaptive", "faddeeva"):
        assert theoretical_weak_moment(CauchyLocation(2.0), K3, P(0), method=method) == pytest.approx(CAUCHY2_M0, abs=1e-10)
    assert theoretical_weak_moment(CauchyLocation(2.0), K3, P(1)) == pytest.approx(CAUCHY2_M1, abs=1e-10)


def test_bivariate_cauchy_m0():
    m0 = theoretical_weak_moment(BivariateCauchyLocation((0, 0)), K3, MomentIndex.constant(2))
    assert m0 == pytest.approx(BIVARIATE_CAUCHY0_M0, abs=1e-10)


def test_hermite_route_on_smooth_model():
    model = BivariateT3LocationScale((0.5, -0.5), 4.0)
    a = theoretical_weak_moment(model, K3, MomentIndex.radial2(), method="hermite")
    b = theoretical_weak_moment(model, K3, MomentIndex.radial2())
    assert a == pytest.approx(b, rel=1e-6)


@given(st.floats(-8, 8))
def test_faddeeva_and_quadrature_agree(mu):
    a = theoretical_weak_moment(CauchyLocation(mu), K3, P(0), method="faddeeva")
    b = theoretical_weak_moment(CauchyLocation(mu), K3, P(0), method="adaptive")
    assert a == pytest.approx(b, abs=1e-10)


def test_monotonicity_window():
    mus = np.linspace(-8, 8, 161)
    r = [normalized_moment(CauchyLocation(m), K3, P(1)) for m in mus]
    assert np.all(np.diff(r) > 0)


def test_monotonicity_turning_point():
    # scipy Faddeeva oracle: r(mu) = mu - Im w / Re w peaks at |mu| = 7.086
    from scipy.special import wofz

    mus = np.linspace(0, 9, 9001)
    w = wofz((mus + 1j) / (3 * np.sqrt(2)))
    oracle = mus[np.argmax(mus - w.imag / w.real)]
    assert oracle == pytest.approx(7.086, abs=1e-3)
    inner = np.linspace(-oracle + 0.01, oracle - 0.01, 141)
    r = [normalized_moment(CauchyLocation(m), K3, P(1)) for m in inner]
    assert np.all(np.diff(r) > 0)


GRID_MODELS = [
    CauchyLocation(-8.0),
    CauchyLocation(2.0),
    StudentTLocationScale(1.0, 0.3),
    StudentTLocationScale(-5.0, 4.0),
    ContaminatedModel(CauchyLocation(2.0), CauchyLocation(7.0), 0.1),
]


@pytest.mark.parametrize("model", GRID_MODELS)
@pytest.mark.parametrize("sigma", [1.0, 3.0, 5.0])
def test_moments_finite(model, sigma):
    m = weak_expectations(model, GaussianKernel(sigma), MomentSet.powers(range(7)))
    assert np.all(np.isfinite(m))


def test_bivariate_moments_finite():
    for model in (BivariateCauchyLocation((1, 1)), BivariateT3LocationScale((0, 0), 1)):
        m = weak_expectations(model, GaussianKernel(3.0, 2), MomentSet.parse("0:0,1:0,0:1,2:1,r2"))
        assert np.all(np.isfinite(m))


def test_empirical_trivial_cases():
    assert empirical_weak_expectation([0.0], K3, P(1)) == 0.0
    assert empirical_weak_expectation([1.0, -1.0], K3, P(1)) == 0.0
    with pytest.raises(ValueError):
        empirical_weak_expectation([], K3, P(0))


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=50), st.floats(0.5, 10))
def test_empirical_m0_is_mean_weight(xs, s):
    k = GaussianKernel(s)
    v = empirical_weak_expectation(xs, k, P(0))
    assert v == pytest.approx(np.mean(k(np.array(xs))), rel=1e-12, abs=1e-300)
    assert 0.0 <= v <= 1.0


def test_empirical_lln():
    # consistency within three standard errors of the squared-kernel variance
    x = CauchyLocation(2.0).sample(1_000_000, 7)
    cond = MomentCondition(CauchyLocation(), K3, MomentSet.powers([1]))
    s11 = cond.score_covariance([2.0])[0, 0]
    est = empirical_weak_expectation(x, K3, P(1))
    assert abs(est - CAUCHY2_M1) < 3 * np.sqrt(s11 / len(x))


def test_weak_cf():
    model = CauchyLocation(2.0)
    assert theoretical_weak_cf(model, K3, 0.0) == pytest.approx(CAUCHY2_M0, abs=1e-12)
    assert weak_cgf(model, K3, 0.0) == pytest.approx(np.log(CAUCHY2_M0), abs=1e-12)
    x = model.sample(200, 1)
    assert empirical_weak_cf(x, K3, 0.0) == pytest.approx(empirical_weak_moments(x, K3, MomentSet.powers([0]))[0])
    # derivative at zero is i m_1
    h = 1e-5
    d = (theoretical_weak_cf(model, K3, h) - theoretical_weak_cf(model, K3, -h)) / (2 * h)
    assert d == pytest.approx(1j * CAUCHY2_M1, abs=1e-8)


def test_gaussian_cumulants():
    mu, s2 = 1.3, 0.7
    k = weak_cumulants([1.0, mu, mu * mu + s2])
    assert k[1] == pytest.approx(mu)
    assert k[2] == pytest.approx(s2)


def test_symmetric_cumulants():
    m = weak_expectations(CauchyLocation(0.0), K3, MomentSet.powers(range(5)))
    k = weak_cumulants(m)
    assert abs(k[1]) < 1e-12 and abs(k[3]) < 1e-12


def test_cauchy_cumulants_round_trip():
    m = weak_expectations(CauchyLocation(1.0), K3, MomentSet.powers(range(5)))
    np.testing.assert_allclose(moments_from_cumulants(weak_cumulants(m)), m, rtol=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=6), st.floats(0.5, 2))
def test_cumulant_round_trip(tail, m0):
    m = np.array([m0, *tail])
    back = moments_from_cumulants(weak_cumulants(m))
    np.testing.assert_allclose(back, m, rtol=0, atol=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=7))
def test_cumulant_round_trip_other_direction(kappa):
    k = np.array(kappa)
    np.testing.assert_allclose(weak_cumulants(moments_from_cumulants(k)), k, rtol=1e-9, atol=1e-9)


def test_cumulant_validation():
    with pytest.raises(ValueError):
        weak_cumulants([0.0, 1.0])
    with pytest.raises(ValueError):
        weak_cumulants([1.0])


@pytest.mark.parametrize(
    "family,theta,moments,normalized",
    [
        (CauchyLocation(), [2.0], "1", False),
        (CauchyLocation(), [2.0], "1,2", True),
        (StudentTLocationScale(), [0.5, 1.5], "1,2,3", False),
        (BivariateT3LocationScale(), [0.5, -0.2, 1.2], "1:0,0:1,r2", True),
    ],
)
def test_numeric_and_analytic_jacobians_agree(family, theta, moments, normalized):
    cond = MomentCondition(family, K3, MomentSet.parse(moments), normalized)
    np.testing.assert_allclose(cond.jacobian(theta), cond.analytic_jacobian(theta), atol=1e-8, rtol=1e-7)


def test_score_has_mean_zero():
    cond = MomentCondition(CauchyLocation(), K3, MomentSet.powers([1, 2]), normalized=True)
    x, w = CauchyLocation(2.0).rule(3.0)
    assert np.all(np.abs(w @ cond.scores(x, [2.0])) < 1e-12)


def test_raw_population_is_weak_moment():
    cond = MomentCondition(CauchyLocation(), K3, MomentSet.powers([0, 1]))
    np.testing.assert_allclose(cond.population([2.0]), [CAUCHY2_M0, CAUCHY2_M1], atol=1e-12)


def test_score_covariance_matches_empirical():
    cond = MomentCondition(CauchyLocation(), K3, MomentSet.powers([1, 2]))
    s = cond.score_covariance([2.0])
    x = CauchyLocation(2.0).sample(400_000, 3)
    emp = np.cov(cond.scores(x, [2.0]).T)
    np.testing.assert_allclose(emp, s, rtol=0.03)


def test_condition_rejects_zeroth_moment_when_normalised():
    with pytest.raises(ValueError):
        MomentCondition(CauchyLocation(), K3, MomentSet.powers([0, 1]), True)
