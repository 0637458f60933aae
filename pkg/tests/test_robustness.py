from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from weakmoments.estimators import IdentifiabilityError
from weakmoments.kernel import GaussianKernel
from weakmoments.models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    StudentTLocationScale,
)
from weakmoments.robustness import (
    InfluenceProfile,
    asymptotic_variance,
    contamination_influence,
    diagnose,
    empirical_score_covariance,
    gross_error_sensitivity,
    influence_function,
    influence_profile,
    median_diagnostics,
    plateau,
    relative_efficiency,
    sandwich,
    sandwich_s,
    score_sup,
)
from weakmoments.weakcore import MomentCondition, MomentSet

K3 = GaussianKernel(3.0)
J1 = MomentSet.powers([1])


def _cauchy_oracle(sigma=3.0):
    """Independent scipy-quad values of dm1/dmu, S and V at mu = 0, j = 1."""
    f = lambda x: 1.0 / (np.pi * (1 + x * x))
    phi = lambda x: np.exp(-x * x / (2 * sigma * sigma))
    dm = integrate.quad(lambda x: x * phi(x) * f(x) * 2 * x / (1 + x * x), -np.inf, np.inf, epsabs=1e-14)[0]
    s = integrate.quad(lambda x: x * x * phi(x) ** 2 * f(x), -np.inf, np.inf, epsabs=1e-14)[0]
    return dm, s, s / dm**2


def test_cauchy_diagnostics_against_quad_oracle():
    dm, s, v = _cauchy_oracle()
    pieces = sandwich(CauchyLocation(0.0), K3, J1)
    assert -pieces.G[0, 0] == pytest.approx(dm, rel=1e-8)
    assert pieces.S[0, 0] == pytest.approx(s, rel=1e-10)
    assert pieces.V[0, 0] == pytest.approx(v, rel=1e-8)
    ges, where = gross_error_sensitivity(CauchyLocation(0.0), K3, J1)
    # sup |x phi(x)| = sigma / sqrt(e) at x = sigma
    assert ges == pytest.approx(3.0 / np.sqrt(np.e) / dm, rel=1e-8)
    assert abs(where[0]) == pytest.approx(3.0, abs=1e-4)


def test_if_zero_at_origin_and_plateau():
    model = CauchyLocation(0.0)
    assert influence_function(model, K3, J1, [0.0])[0, 0] == pytest.approx(0.0, abs=1e-15)
    far = influence_function(model, K3, J1, [150.0, -150.0])[0]
    pieces = sandwich(model, K3, J1)
    m1 = 0.0
    np.testing.assert_allclose(far, m1 / pieces.G[0, 0], atol=1e-12)
    # off-centre, the plateau is -m_j / dm_j
    model = CauchyLocation(2.0)
    pieces = sandwich(model, K3, J1)
    m1 = 0.9997906105357708
    assert plateau(model, K3, J1)[0] == pytest.approx(m1 / pieces.G[0, 0], rel=1e-10)


def test_if_sign_matches_intuition():
    # an outlier just right of the centre pulls the estimate to the right
    assert influence_function(CauchyLocation(0.0), K3, J1, [1.0])[0, 0] > 0


def test_median_closed_forms():
    med = median_diagnostics(CauchyLocation(0.0))
    assert med.ges == pytest.approx(np.pi / 2, rel=1e-14)
    assert med.variance == pytest.approx(np.pi**2 / 4, rel=1e-14)


def test_efficiency_definition():
    _, _, v = _cauchy_oracle()
    eff = relative_efficiency(v, np.pi**2 / 4)
    assert eff == pytest.approx(np.pi**2 / 4 / v)


FAMILY_GRID = [
    (CauchyLocation(2.0), [MomentSet.powers([j]) for j in range(0, 5)]),
    (StudentTLocationScale(0.5, 1.5), [MomentSet.powers([j, j + 1]) for j in range(1, 4)]),
    (BivariateCauchyLocation((1.0, 1.0)), [MomentSet.parse("1:0,0:1"), MomentSet.parse("2:1,1:2")]),
    (BivariateT3LocationScale((0.5, 0.0), 1.0), [MomentSet.parse("1:0,0:1,r2")]),
]
CASES = [(m, js, s) for m, sets in FAMILY_GRID for js in sets for s in (1.0, 3.0, 5.0)]


@pytest.mark.parametrize("model,moments,sigma", CASES, ids=lambda v: str(v))
def test_bounded_scores_and_redescent(model, moments, sigma):
    k = GaussianKernel(sigma)
    sup = score_sup(model, k, moments)
    assert np.all(np.isfinite(sup))
    plat = plateau(model, k, moments)
    if model.dimension == 1:
        far = [12 * sigma, -12 * sigma, 30 * sigma]
    else:
        far = [[12 * sigma, 0.0], [0.0, -12 * sigma], [-12 * sigma / np.sqrt(2)] * 2]
    vals = influence_function(model, k, moments, far)
    assert np.max(np.abs(vals - plat[:, None])) < 1e-6


def _raw_score_abs(j, sigma):
    model = CauchyLocation(2.0)
    cond = MomentCondition(model, GaussianKernel(sigma), MomentSet.powers([j]))
    x = np.arange(-12 * sigma, 12 * sigma + 1e-9, 0.01 * sigma)
    return x, np.abs(cond.scores(x, model.theta)[:, 0]), cond.population(model.theta)[0]


@pytest.mark.parametrize("j", range(1, 5))
@pytest.mark.parametrize("sigma", [1.0, 3.0, 5.0])
def test_score_sup_location(j, sigma):
    x, s, _ = _raw_score_abs(j, sigma)
    assert abs(x[np.argmax(s)]) <= 4 * sigma * np.sqrt(j + 1)


@pytest.mark.parametrize("sigma", [1.0, 3.0, 5.0])
def test_zeroth_score_sup(sigma):
    # phi - m0 ranges over [-m0, 1 - m0]; when m0 > 1/2 the sup sits in the tails
    x, s, m0 = _raw_score_abs(0, sigma)
    assert np.max(s) == pytest.approx(max(m0, 1 - m0), rel=1e-9)


@pytest.mark.parametrize(
    "model,moments",
    [
        (CauchyLocation(2.0), MomentSet.powers([1, 2])),
        (CauchyLocation(-1.0), MomentSet.powers([0, 1, 2])),
        (StudentTLocationScale(0.5, 1.5), MomentSet.powers([1, 2, 3])),
        (BivariateT3LocationScale((0.5, 0.0), 1.0), MomentSet.parse("1:0,0:1,r2,2:0")),
    ],
)
def test_efficient_weighting_is_optimal(model, moments):
    v_opt = asymptotic_variance(model, K3, moments, "optimal")
    v_id = asymptotic_variance(model, K3, moments, "identity")
    assert np.min(np.linalg.eigvalsh(v_id - v_opt)) > -1e-9 * np.max(np.abs(v_id))


@pytest.mark.parametrize(
    "model,moments,normalized,weighting",
    [
        (CauchyLocation(0.0), MomentSet.powers([1]), False, "identity"),
        (CauchyLocation(2.0), MomentSet.powers([1]), True, "identity"),
        (CauchyLocation(2.0), MomentSet.powers([1, 2]), False, "optimal"),
        (StudentTLocationScale(0.0, 1.0), MomentSet.powers([1, 2]), False, "identity"),
        (StudentTLocationScale(0.5, 1.5), MomentSet.powers([1, 2, 3]), True, "optimal"),
    ],
)
def test_if_matches_contamination_oracle(model, moments, normalized, weighting):
    x = np.linspace(-12 * 3.0, 12 * 3.0, 50) + model.theta[0]
    closed = influence_function(model, K3, moments, x, weighting, normalized)
    fd = contamination_influence(model, K3, moments, x, 1e-4, weighting, normalized)
    scale = np.max(np.abs(closed), axis=1, keepdims=True)
    assert np.max(np.abs(closed - fd) / scale) < 0.01


def test_bivariate_if_matches_oracle():
    model = BivariateCauchyLocation((1.0, 1.0))
    moments = MomentSet.parse("1:0,0:1")
    pts = np.array([[0.0, 0.0], [2.0, 1.0], [-3.0, 4.0], [10.0, -5.0]])
    closed = influence_function(model, K3, moments, pts)
    fd = contamination_influence(model, K3, moments, pts)
    np.testing.assert_allclose(fd, closed, atol=0.01 * np.abs(closed).max())


def test_raw_s_matches_empirical():
    model = CauchyLocation(2.0)
    moments = MomentSet.powers([1, 2])
    s = sandwich_s(model, K3, moments)
    x = model.sample(1_000_000, 99)
    emp = empirical_score_covariance(x, model, K3, moments)
    np.testing.assert_allclose(emp, s, rtol=0.02)


def test_rank_deficiency():
    with pytest.raises(IdentifiabilityError):
        sandwich(CauchyLocation(0.0), K3, MomentSet.powers([2]))


def test_profile_round_trip(tmp_path):
    prof = influence_profile(CauchyLocation(0.0), K3, J1, np.linspace(-10, 10, 11))
    path = tmp_path / "if.csv"
    prof.to_csv(path)
    back = InfluenceProfile.from_csv(path)
    np.testing.assert_array_equal(back.grid, prof.grid)
    np.testing.assert_array_equal(back.values, prof.values)


def test_diagnose_bundle():
    d = diagnose(CauchyLocation(0.0), K3, J1)
    assert d.ges > 0 and d.variance.shape == (1, 1)
    assert d.plateau[0] == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-30, 30))
def test_if_bounded_by_ges(x):
    model = CauchyLocation(0.0)
    ges, _ = gross_error_sensitivity(model, K3, J1)
    assert abs(influence_function(model, K3, J1, [x])[0, 0]) <= ges * (1 + 1e-12)


@given(st.floats(-40, 40))
def test_if_is_odd_for_symmetric_model(x):
    v = influence_function(CauchyLocation(0.0), K3, J1, [x, -x])[0]
    assert v[0] == pytest.approx(-v[1], abs=1e-14)
