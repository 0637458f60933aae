"""Weak-moment, GMM and weak-CF estimators plus the classical benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .kernel import GaussianKernel
from .models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    StudentTLocationScale,
)
from .weakcore import (
    MomentCondition,
    MomentSet,
    as_data,
    empirical_weak_cf,
    theoretical_weak_cf,
)

MAD_CONSTANT = 1.4826
HUBER_K = 1.345
TUKEY_C = 4.685
DEFAULT_RIDGE = 0.10
# half-width of the box around the start, in kernel bandwidths
TRUST_RADIUS = 4.0
# over-identified convergence: relative size of the Gauss-Newton correction
STEP_TOL = 1e-8

WEAK_METHODS = ("wm", "gmm", "cf")
BENCHMARK_METHODS = (
    "median",
    "coordmedian",
    "spatialmedian",
    "mle",
    "huber",
    "tukey",
    "meansd",
    "medmad",
)


class IdentifiabilityError(ValueError):
    """The moment Jacobian is rank deficient at the solution."""


@dataclass(frozen=True)
class WeightingScheme:
    kind: str = "identity"  # or "twostep"
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self):
        if self.kind not in ("identity", "twostep"):
            raise ValueError(f"unknown weighting {self.kind!r}")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass(frozen=True)
class EstimatorConfig:
    """What to estimate and how.

    ``family`` is a model instance whose parameter values are ignored; it fixes
    the parametric family (and, for weak methods, the moment map).
    ``start=None`` starts from the (coordinatewise) median and a MAD scale.
    """

    method: str
    family: object = field(default_factory=CauchyLocation)
    kernel: GaussianKernel = field(default_factory=GaussianKernel)
    moments: MomentSet | None = None
    weighting: WeightingScheme = field(default_factory=WeightingScheme)
    normalized: bool = False
    tuning: float | None = None
    t_grid: tuple[float, ...] | None = None
    start: tuple[float, ...] | None = None
    max_iter: int = 100
    tol: float = 1e-10
    label: str | None = None

    def __post_init__(self):
        if self.method not in WEAK_METHODS + BENCHMARK_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol and max_iter must be positive")
        if self.tuning is not None and self.tuning <= 0:
            raise ValueError("tuning constant must be positive")
        if self.method in ("wm", "gmm") and self.moments is None:
            raise ValueError("weak moment methods need a moment set")
        if self.method in ("wm", "gmm") and len(self.moments) < self.family.n_params:
            raise ValueError("fewer moments than parameters")

    @property
    def name(self) -> str:
        return self.label or self.method


@dataclass
class EstimateResult:
    theta: np.ndarray
    converged: bool
    iterations: int = 0
    objective: float = 0.0
    asymptotic_cov: np.ndarray | None = None
    start: np.ndarray | None = None
    message: str = ""

    @property
    def std_errors(self) -> np.ndarray | None:
        if self.asymptotic_cov is None:
            return None
        return np.sqrt(np.clip(np.diag(self.asymptotic_cov), 0.0, None))


# --------------------------------------------------------------------------
# starting values


def mad_scale(x: np.ndarray, centre=None) -> float:
    """``1.4826 * median |x - centre|``, pooled over coordinates in d >= 2."""
    centre = np.median(x, axis=0) if centre is None else centre
    return float(MAD_CONSTANT * np.median(np.abs(x - centre)))


def _has_scale(family) -> bool:
    return isinstance(family, (StudentTLocationScale, BivariateT3LocationScale))


def robust_start(x: np.ndarray, family) -> np.ndarray:
    loc = np.atleast_1d(np.median(x, axis=0))
    if _has_scale(family):
        return np.concatenate([loc, [mad_scale(x)]])
    return loc


def _box(start: np.ndarray, family, bandwidth: float):
    lo = start - TRUST_RADIUS * bandwidth
    hi = start + TRUST_RADIUS * bandwidth
    if _has_scale(family):
        lo[-1] = max(1e-3 * start[-1], 1e-8)
    return lo, hi


# --------------------------------------------------------------------------
# projected Gauss-Newton on a weighted residual


@dataclass
class _Fit:
    theta: np.ndarray
    converged: bool
    iterations: int
    objective: float
    message: str


def _gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    derivative: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    weight: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int,
    tol: float,
    just_identified: bool,
) -> _Fit:
    """Minimise ``r^T W r`` inside the box ``[lo, hi]``.

    Convergence: ``|r| <= tol`` when the system is square.  Otherwise the
    weighted gradient ``|D^T W r| <= tol`` or a Gauss-Newton correction below
    ``STEP_TOL * (1 + |theta|)``; the minimum of an over-identified objective
    is only located to the accuracy of the finite-difference Jacobian.
    Stalling or ending on the box boundary reports ``converged=False``.
    """
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    r = residual(theta)
    q = float(r @ weight @ r)

    def done(it):
        on_edge = np.any(np.isclose(theta, lo, rtol=0, atol=1e-9)) or np.any(np.isclose(theta, hi, rtol=0, atol=1e-9))
        if on_edge:
            return _Fit(theta, False, it, q, "solution on trust-region boundary")
        return _Fit(theta, True, it, q, "")

    for it in range(1, max_iter + 1):
        d = derivative(theta)
        grad = d.T @ weight @ r
        crit = np.linalg.norm(r) if just_identified else np.linalg.norm(grad)
        if crit <= tol:
            return done(it)
        h = d.T @ weight @ d
        try:
            step = -np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(h, grad, rcond=None)[0]
        small = np.max(np.abs(step)) <= STEP_TOL * (1.0 + np.max(np.abs(theta)))
        if small and not just_identified:
            return done(it)
        alpha = 1.0
        while alpha > 1e-10:
            cand = np.clip(theta + alpha * step, lo, hi)
            r_new = residual(cand)
            q_new = float(r_new @ weight @ r_new)
            if q_new < q:
                break
            alpha *= 0.5
        else:
            return _Fit(theta, False, it, q, "line search stalled")
        moved = np.max(np.abs(cand - theta))
        theta, r, q = cand, r_new, q_new
        if moved <= 1e-15 * (1.0 + np.max(np.abs(theta))):
            return _Fit(theta, False, it, q, "no progress")
    return _Fit(theta, False, max_iter, q, "maximum iterations reached")


def _check_rank(d: np.ndarray):
    sv = np.linalg.svd(d, compute_uv=False)
    if sv.size < d.shape[1] or sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise IdentifiabilityError("moment Jacobian is rank deficient at the solution")


# --------------------------------------------------------------------------
# weak moment estimators


def moment_condition(config: EstimatorConfig) -> MomentCondition:
    return MomentCondition(config.family, config.kernel, config.moments, config.normalized)


def _fit_moments(cond: MomentCondition, stats, theta0, weight, lo, hi, config) -> _Fit:
    scale = stats[0] if cond.normalized else 1.0

    def derivative(theta):
        return -scale * cond.jacobian(theta)

    return _gauss_newton(
        lambda th: cond.mean_score(stats, th),
        derivative,
        theta0,
        weight,
        lo,
        hi,
        config.max_iter,
        config.tol,
        just_identified=cond.n_moments == cond.n_params,
    )


def _sandwich(d: np.ndarray, w: np.ndarray, s: np.ndarray) -> np.ndarray:
    bread = np.linalg.inv(d.T @ w @ d)
    return bread @ d.T @ w @ s @ w @ d @ bread


def estimate_weak_moment(data, config: EstimatorConfig) -> EstimateResult:
    """Weak moment / GMM estimate minimising ``g_n^T W g_n``.

    One step with ``W = I`` for ``weighting.kind == "identity"``; for
    ``"twostep"`` the step-one estimate feeds ``S_hat``, the mean outer
    product of the scores, and step two uses ``W = (S_hat + ridge I)^-1``.
    Just-identified systems reduce to solving ``g_n(theta) = 0``.
    """
    cond = moment_condition(config)
    x = as_data(data, cond.family.dimension)
    stats = cond.sufficient(x)
    start = np.asarray(config.start, dtype=float) if config.start is not None else robust_start(x, cond.family)
    lo, hi = _box(start, cond.family, config.kernel.bandwidth)
    k = cond.n_moments
    weight = np.eye(k)
    fit = _fit_moments(cond, stats, start, weight, lo, hi, config)
    iterations = fit.iterations
    if config.weighting.kind == "twostep" and k > cond.n_params:
        sc = cond.scores(x, fit.theta)
        s_hat = sc.T @ sc / len(x)
        weight = np.linalg.inv(s_hat + config.weighting.ridge * np.eye(k))
        fit = _fit_moments(cond, stats, fit.theta, weight, lo, hi, config)
        iterations += fit.iterations
    scale = stats[0] if cond.normalized else 1.0
    d = -scale * cond.jacobian(fit.theta)
    _check_rank(d)
    sc = cond.scores(x, fit.theta)
    s_hat = sc.T @ sc / len(x)
    try:
        cov = _sandwich(d, weight, s_hat) / len(x)
    except np.linalg.LinAlgError:
        cov = None
    return EstimateResult(fit.theta, fit.converged, iterations, fit.objective, cov, start, fit.message)


def estimate_gmm_two_step(data, config: EstimatorConfig) -> EstimateResult:
    if config.weighting.kind != "twostep":
        config = replace(config, weighting=WeightingScheme("twostep", config.weighting.ridge))
    return estimate_weak_moment(data, config)


# --------------------------------------------------------------------------
# weak characteristic function matching

CF_POINTS = 64
CF_HALF_WIDTH = 4.0


def default_t_grid(bandwidth: float = 3.0) -> np.ndarray:
    """64 equispaced points on ``[-4, 4] * 3 / bandwidth``."""
    half = CF_HALF_WIDTH * 3.0 / bandwidth
    return np.linspace(-half, half, CF_POINTS)


def cf_weights(t: np.ndarray) -> np.ndarray:
    """Integration weights ``w(t_k) dt`` with ``w(t) = exp(-t^2 / 2)``."""
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    return np.exp(-0.5 * t * t) * dt


def cf_discrepancy(data, config: EstimatorConfig, theta) -> float:
    """Discretised ``integral |cf_hat(t) - cf_theta(t)|^2 w(t) dt``."""
    t = np.asarray(config.t_grid if config.t_grid is not None else default_t_grid(config.kernel.bandwidth))
    diff = empirical_weak_cf(data, config.kernel, t) - theoretical_weak_cf(
        config.family.with_theta(theta), config.kernel, t
    )
    return float(np.sum(cf_weights(t) * np.abs(diff) ** 2))


def estimate_weak_cf(data, config: EstimatorConfig) -> EstimateResult:
    family = config.family
    if family.dimension != 1:
        raise ValueError("weak CF matching is univariate")
    x = as_data(data, 1)
    t = np.asarray(config.t_grid if config.t_grid is not None else default_t_grid(config.kernel.bandwidth))
    root_w = np.sqrt(cf_weights(t))
    target = empirical_weak_cf(x, config.kernel, t)
    target = np.concatenate([root_w * target.real, root_w * target.imag])

    def model_cf(theta):
        cf = theoretical_weak_cf(family.with_theta(theta), config.kernel, t)
        return np.concatenate([root_w * cf.real, root_w * cf.imag])

    def derivative(theta):
        h = 1e-5 * np.maximum(1.0, np.abs(theta))
        cols = []
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h[i]
            cols.append(-(model_cf(theta + e) - model_cf(theta - e)) / (2 * h[i]))
        return np.column_stack(cols)

    start = np.asarray(config.start, dtype=float) if config.start is not None else robust_start(x, family)
    lo, hi = _box(start, family, config.kernel.bandwidth)
    fit = _gauss_newton(
        lambda th: target - model_cf(th),
        derivative,
        start,
        np.eye(len(target)),
        lo,
        hi,
        config.max_iter,
        config.tol,
        just_identified=False,
    )
    return EstimateResult(fit.theta, fit.converged, fit.iterations, fit.objective, None, start, fit.message)


# --------------------------------------------------------------------------
# benchmarks


def _irls_location(x, start, weight_fn, scale, max_iter, tol):
    mu = start
    for it in range(1, max_iter + 1):
        w = weight_fn((x - mu) / scale)
        if w.sum() <= 0:
            return mu, False, it
        new = np.sum(w * x) / np.sum(w)
        if abs(new - mu) <= tol * (1.0 + abs(mu)):
            return new, True, it
        mu = new
    return mu, False, max_iter


def huber_weights(u: np.ndarray, k: float) -> np.ndarray:
    a = np.abs(u)
    return np.where(a <= k, 1.0, k / np.maximum(a, 1e-300))


def tukey_weights(u: np.ndarray, c: float) -> np.ndarray:
    return np.where(np.abs(u) < c, (1.0 - (u / c) ** 2) ** 2, 0.0)


def spatial_median(x: np.ndarray, max_iter: int = 500, tol: float = 1e-10):
    """Weiszfeld iteration from the coordinatewise median.

    Observations coinciding with the current iterate are dropped from the
    weights (the usual fix-up); returns ``(median, converged, iterations)``.
    """
    y = np.median(x, axis=0)
    for it in range(1, max_iter + 1):
        dist = np.linalg.norm(x - y, axis=1)
        keep = dist > 1e-12
        w = 1.0 / dist[keep]
        new = (w[:, None] * x[keep]).sum(axis=0) / w.sum()
        if np.linalg.norm(new - y) <= tol * (1.0 + np.linalg.norm(y)):
            return new, True, it
        y = new
    return y, False, max_iter


def _cauchy_newton(x, start, max_iter, tol):
    """Newton on the Cauchy location score with step halving on the likelihood."""

    def loglik(m):
        return -np.sum(np.log1p((x - m) ** 2))

    mu = start
    ll = loglik(mu)
    for it in range(1, max_iter + 1):
        u = x - mu
        score = np.sum(2 * u / (1 + u * u))
        curv = np.sum(2 * (1 - u * u) / (1 + u * u) ** 2)
        step = score / curv if curv > 0 else np.sign(score) * 0.5
        alpha = 1.0
        while alpha > 1e-8:
            cand = mu + alpha * step
            ll_new = loglik(cand)
            if ll_new >= ll:
                break
            alpha *= 0.5
        else:
            return start, False, it
        if abs(cand - mu) <= tol * (1.0 + abs(mu)):
            return cand, True, it
        mu, ll = cand, ll_new
    return start, False, max_iter


def _t_em(x, family, start, max_iter, tol):
    """EM / iterative reweighting for the isotropic elliptical t MLE."""
    nu, d = family.df, family.dimension
    fit_scale = _has_scale(family)
    mu = start[:d] if d > 1 else start[0]
    s = start[-1] if fit_scale else 1.0
    def pack(mu, s):
        return np.concatenate([np.atleast_1d(mu), [s]]) if fit_scale else np.atleast_1d(mu)

    for it in range(1, max_iter + 1):
        resid = x - mu
        r2 = resid**2 if d == 1 else np.sum(resid**2, axis=1)
        w = (nu + d) / (nu + r2 / s**2)
        new_mu = (w @ x) / w.sum() if d > 1 else np.sum(w * x) / w.sum()
        resid = x - new_mu
        r2 = resid**2 if d == 1 else np.sum(resid**2, axis=1)
        new_s = np.sqrt(np.sum(w * r2) / (d * len(x))) if fit_scale else 1.0
        change = np.max(np.abs(np.atleast_1d(new_mu - mu))) + abs(new_s - s)
        mu, s = new_mu, new_s
        if change <= tol * (1.0 + np.max(np.abs(np.atleast_1d(mu))) + s):
            return pack(mu, s), True, it
    return pack(mu, s), False, max_iter


def benchmark_estimate(data, config: EstimatorConfig) -> EstimateResult:
    """Classical and robust comparison estimators.

    Location estimators (median, Huber, Tukey, spatial/coordinatewise median)
    fill the scale slot of location-scale families with the MAD scale.
    """
    family = config.family
    x = as_data(data, family.dimension)
    d = family.dimension
    method = config.method
    start = robust_start(x, family)
    tol = config.tol
    converged, iterations = True, 0

    def with_scale(loc, scale_value=None):
        loc = np.atleast_1d(np.asarray(loc, dtype=float))
        if _has_scale(family):
            return np.concatenate([loc, [mad_scale(x) if scale_value is None else scale_value]])
        return loc

    if method in ("median", "coordmedian"):
        theta = with_scale(np.median(x, axis=0))
    elif method == "spatialmedian":
        if d < 2:
            theta = with_scale(np.median(x))
        else:
            loc, converged, iterations = spatial_median(x, max(config.max_iter, 500), tol)
            theta = with_scale(loc)
    elif method == "meansd":
        loc = np.mean(x, axis=0)
        sd = float(np.sqrt(np.mean(np.var(x, axis=0, ddof=1)))) if d > 1 else float(np.std(x, ddof=1))
        theta = with_scale(loc, sd)
    elif method == "medmad":
        theta = with_scale(np.median(x, axis=0))
    elif method in ("huber", "tukey"):
        if d != 1:
            raise ValueError(f"{method} is a univariate location estimator")
        scale = mad_scale(x)
        if method == "huber":
            k = config.tuning or HUBER_K
            wfn = lambda u: huber_weights(u, k)  # noqa: E731
        else:
            c = config.tuning or TUKEY_C
            wfn = lambda u: tukey_weights(u, c)  # noqa: E731
        loc, converged, iterations = _irls_location(x, float(np.median(x)), wfn, scale, config.max_iter, tol)
        theta = with_scale(loc, scale)
    elif method == "mle":
        if isinstance(family, CauchyLocation):
            loc, converged, iterations = _cauchy_newton(x, float(start[0]), config.max_iter, tol)
            theta = np.array([loc])
        elif isinstance(family, (StudentTLocationScale, BivariateCauchyLocation, BivariateT3LocationScale)):
            theta, converged, iterations = _t_em(x, family, start, max(config.max_iter, 500), tol)
        else:
            raise ValueError(f"no MLE for {type(family).__name__}")
    else:
        raise ValueError(f"{method!r} is not a benchmark method")
    return EstimateResult(np.asarray(theta, dtype=float), bool(converged), iterations, 0.0, None, start)


def estimate(data, config: EstimatorConfig) -> EstimateResult:
    """Dispatch on ``config.method``."""
    if config.method in ("wm", "gmm"):
        return estimate_weak_moment(data, config)
    if config.method == "cf":
        return estimate_weak_cf(data, config)
    return benchmark_estimate(data, config)
