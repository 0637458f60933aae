"""Influence functions, gross error sensitivity and sandwich variances.

Conventions: ``G = E[d score / d theta]``, which for raw weak moments is
``-dm/dtheta``.  With that ``G`` the influence function of the estimator
minimising ``g_n^T W g_n`` is ``IF(x) = -(G^T W G)^-1 G^T W score(x)``, the
Gateaux derivative of the functional under point-mass contamination.  In the
single-moment case it reduces to ``(x^j phi(x) - m_j) / (dm_j / dtheta)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .estimators import IdentifiabilityError
from .kernel import GaussianKernel
from .weakcore import MomentCondition, MomentSet, as_data, weak_expectations

# GES grid: step in bandwidths and the window half-width
GES_STEP = 0.01
GES_RADIUS = 12.0
# IF plateau evaluated this many bandwidths out
PLATEAU_RADIUS = 20.0


@dataclass(frozen=True)
class SandwichPieces:
    G: np.ndarray
    S: np.ndarray
    W: np.ndarray
    V: np.ndarray


@dataclass
class InfluenceProfile:
    grid: np.ndarray
    values: np.ndarray  # (p, len(grid)) in d = 1, (p, N) for planar point lists
    ges: float

    def to_csv(self, path) -> None:
        path = Path(path)
        grid = np.asarray(self.grid)
        coords = ["x"] if grid.ndim == 1 else [f"x{i + 1}" for i in range(grid.shape[1])]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(coords + [f"if{k + 1}" for k in range(self.values.shape[0])])
            pts = grid[:, None] if grid.ndim == 1 else grid
            for pt, vals in zip(pts, self.values.T):
                w.writerow([repr(float(v)) for v in (*pt, *vals)])

    @classmethod
    def from_csv(cls, path) -> InfluenceProfile:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with Path(path).open() as fh:
            header = fh.readline().strip().split(",")
        n_coords = sum(1 for h in header if h.startswith("x"))
        grid = raw[:, 0] if n_coords == 1 else raw[:, :n_coords]
        values = raw[:, n_coords:].T
        return cls(grid, values, float(np.max(np.linalg.norm(values, axis=0))))


@dataclass(frozen=True)
class Diagnostics:
    ges: float
    variance: np.ndarray
    pieces: SandwichPieces
    plateau: np.ndarray
    argmax: np.ndarray


def _condition(model, kernel, moments, normalized) -> MomentCondition:
    return MomentCondition(model, kernel, moments, normalized)


def sandwich_s(model, kernel: GaussianKernel, moments: MomentSet, normalized: bool = False) -> np.ndarray:
    """Score covariance ``S`` under ``f_theta``.

    Raw moments: ``S_jk = E_{phi^2}[psi_j psi_k] - m_j m_k``, where the first
    term is a weak expectation under the squared kernel.
    """
    cond = _condition(model, kernel, moments, normalized)
    if normalized:
        return cond.score_covariance(model.theta)
    sq = cond.kernel.squared()
    x, w = model.rule(sq.bandwidth)
    psi = moments.evaluate(x)
    second = (psi * (w * sq(x))[:, None]).T @ psi
    m = cond.population(model.theta)
    s = second - np.outer(m, m)
    return 0.5 * (s + s.T)


def _weight_matrix(weighting, s: np.ndarray) -> np.ndarray:
    """``"identity"``, ``"optimal"`` (``S^-1``), a WeightingScheme or a matrix."""
    k = s.shape[0]
    kind = getattr(weighting, "kind", weighting)
    if isinstance(kind, str):
        if kind == "identity":
            return np.eye(k)
        if kind == "optimal":
            return np.linalg.inv(s)
        if kind == "twostep":
            return np.linalg.inv(s + getattr(weighting, "ridge", 0.10) * np.eye(k))
        raise ValueError(f"unknown weighting {weighting!r}")
    w = np.asarray(weighting, dtype=float)
    if w.shape != (k, k):
        raise ValueError("weight matrix has the wrong shape")
    return w


def _check_rank(g: np.ndarray):
    sv = np.linalg.svd(g, compute_uv=False)
    if sv.size < g.shape[1] or sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise IdentifiabilityError("moment Jacobian is rank deficient")


def sandwich(
    model,
    kernel: GaussianKernel,
    moments: MomentSet,
    weighting="identity",
    normalized: bool = False,
) -> SandwichPieces:
    """``V = (G^T W G)^-1 G^T W S W G (G^T W G)^-1`` at ``f_theta``."""
    cond = _condition(model, kernel, moments, normalized)
    g = cond.score_jacobian(model.theta)
    _check_rank(g)
    s = sandwich_s(model, kernel, moments, normalized)
    w = _weight_matrix(weighting, s)
    bread = np.linalg.inv(g.T @ w @ g)
    v = bread @ g.T @ w @ s @ w @ g @ bread
    return SandwichPieces(g, s, w, 0.5 * (v + v.T))


def asymptotic_variance(model, kernel, moments, weighting="identity", normalized=False) -> np.ndarray:
    return sandwich(model, kernel, moments, weighting, normalized).V


def influence_function(
    model,
    kernel: GaussianKernel,
    moments: MomentSet,
    x,
    weighting="identity",
    normalized: bool = False,
    pieces: SandwichPieces | None = None,
) -> np.ndarray:
    """Influence function at the points ``x``; returns shape ``(p, n_points)``."""
    cond = _condition(model, kernel, moments, normalized)
    pieces = pieces or sandwich(model, kernel, moments, weighting, normalized)
    g, w = pieces.G, pieces.W
    pts = np.atleast_1d(np.asarray(x, dtype=float)) if model.dimension == 1 else np.atleast_2d(x)
    psi = cond.scores(pts, model.theta)
    return -np.linalg.solve(g.T @ w @ g, g.T @ w @ psi.T)


def _ges_grid(model, bandwidth: float, step: float, radius: float) -> np.ndarray:
    h = step * bandwidth
    if model.dimension == 1:
        return np.arange(-radius * bandwidth, radius * bandwidth + 0.5 * h, h)
    # polar grid about the kernel centre, coarser than the 1-D grid
    r = np.arange(0.0, radius * bandwidth + 0.5 * h, 5 * h)
    a = np.linspace(0.0, 2 * np.pi, 145)[:-1]
    pts = np.stack([np.outer(r, np.cos(a)).ravel(), np.outer(r, np.sin(a)).ravel()], axis=-1)
    return pts


def gross_error_sensitivity(
    model,
    kernel: GaussianKernel,
    moments: MomentSet,
    weighting="identity",
    normalized: bool = False,
    step: float = GES_STEP,
    radius: float = GES_RADIUS,
    refine: bool = True,
) -> tuple[float, np.ndarray]:
    """``sup_x |IF(x)|`` over a grid of spacing ``step`` bandwidths out to
    ``radius`` bandwidths, polished by a bounded 1-D search around the best
    grid point (d = 1).  Returns ``(ges, argmax)``."""
    pieces = sandwich(model, kernel, moments, weighting, normalized)
    grid = _ges_grid(model, kernel.bandwidth, step, radius)
    norms = np.linalg.norm(influence_function(model, kernel, moments, grid, pieces=pieces, normalized=normalized), axis=0)
    i = int(np.argmax(norms))
    best, where = float(norms[i]), np.atleast_1d(grid[i])
    if refine and model.dimension == 1:
        h = step * kernel.bandwidth

        def neg(t):
            return -float(np.linalg.norm(influence_function(model, kernel, moments, [t], pieces=pieces, normalized=normalized)))

        res = minimize_scalar(neg, bounds=(where[0] - h, where[0] + h), method="bounded", options={"xatol": 1e-10})
        if -res.fun > best:
            best, where = -float(res.fun), np.array([res.x])
    return best, where


def influence_profile(
    model,
    kernel: GaussianKernel,
    moments: MomentSet,
    grid,
    weighting="identity",
    normalized: bool = False,
) -> InfluenceProfile:
    vals = influence_function(model, kernel, moments, grid, weighting, normalized)
    return InfluenceProfile(np.asarray(grid, dtype=float), vals, float(np.max(np.linalg.norm(vals, axis=0))))


def plateau(model, kernel, moments, weighting="identity", normalized=False) -> np.ndarray:
    """The constant the influence function redescends to, taken at 20 bandwidths."""
    far = PLATEAU_RADIUS * kernel.bandwidth
    x = [far] if model.dimension == 1 else [[far] + [0.0] * (model.dimension - 1)]
    return influence_function(model, kernel, moments, x, weighting, normalized)[:, 0]


def diagnose(model, kernel, moments, weighting="identity", normalized=False) -> Diagnostics:
    pieces = sandwich(model, kernel, moments, weighting, normalized)
    ges, where = gross_error_sensitivity(model, kernel, moments, pieces.W, normalized)
    return Diagnostics(ges, pieces.V, pieces, plateau(model, kernel, moments, pieces.W, normalized), where)


def score_sup(model, kernel, moments, radius: float = GES_RADIUS, step: float = GES_STEP) -> np.ndarray:
    """Largest absolute value of each score component on a grid of ``radius`` bandwidths."""
    cond = _condition(model, kernel, moments, False)
    grid = _ges_grid(model, kernel.bandwidth, step, radius)
    return np.max(np.abs(cond.scores(grid, model.theta)), axis=0)


# --------------------------------------------------------------------------
# finite-contamination oracle


def contamination_influence(
    model,
    kernel: GaussianKernel,
    moments: MomentSet,
    x,
    epsilon: float = 1e-4,
    weighting="identity",
    normalized: bool = False,
) -> np.ndarray:
    """``(T((1-eps) F + eps delta_x) - T(F)) / eps`` with ``T`` the population
    GMM functional (``W`` held at its value under ``F``).

    Solved by Gauss-Newton to ~1e-14 in ``theta``; used to validate
    :func:`influence_function`.  Returns ``(p, n_points)``.
    """
    cond = _condition(model, kernel, moments, normalized)
    theta0 = model.theta
    w = sandwich(model, kernel, moments, weighting, normalized).W
    ext = cond.extended
    stats_f = weak_expectations(model, cond.kernel, ext)
    pts = np.atleast_1d(np.asarray(x, dtype=float)) if model.dimension == 1 else np.atleast_2d(x)
    out = []
    for pt in pts:
        point = as_data(np.atleast_1d(pt)[None] if model.dimension > 1 else [pt], model.dimension)
        stats_x = ext.evaluate(point)[0] * cond.kernel(point)[0]
        stats = (1 - epsilon) * stats_f + epsilon * stats_x
        theta = theta0.copy()
        for _ in range(50):
            r = cond.mean_score(stats, theta)
            scale = stats[0] if normalized else 1.0
            d = -scale * cond.jacobian(theta)
            step = -np.linalg.solve(d.T @ w @ d, d.T @ w @ r)
            theta = theta + step
            if np.max(np.abs(step)) < 1e-15 * (1 + np.max(np.abs(theta))):
                break
        out.append((theta - theta0) / epsilon)
    return np.array(out).T


# --------------------------------------------------------------------------
# benchmark closed forms


@dataclass(frozen=True)
class MedianDiagnostics:
    ges: float
    variance: float


def median_diagnostics(model) -> MedianDiagnostics:
    """Median of a symmetric univariate law: ``GES = 1/(2 f(mu))``,
    ``V = 1/(4 f(mu)^2)``."""
    if model.dimension != 1:
        raise ValueError("median diagnostics are univariate")
    f0 = float(model.density(np.array([model.loc[0]]))[0])
    return MedianDiagnostics(1.0 / (2.0 * f0), 1.0 / (4.0 * f0 * f0))


def relative_efficiency(v_estimator: float, v_reference: float) -> float:
    """``V_reference / V_estimator``: above 1 means the estimator is more efficient."""
    return float(v_reference) / float(v_estimator)


def empirical_score_covariance(data, model, kernel, moments, normalized=False) -> np.ndarray:
    """Sample covariance of the per-observation scores; a Monte Carlo check on ``S``."""
    cond = _condition(model, kernel, moments, normalized)
    sc = cond.scores(as_data(data, model.dimension), model.theta)
    return np.cov(sc, rowvar=False, bias=True).reshape(len(moments), len(moments))


__all__ = [
    "Diagnostics",
    "InfluenceProfile",
    "MedianDiagnostics",
    "SandwichPieces",
    "asymptotic_variance",
    "contamination_influence",
    "diagnose",
    "empirical_score_covariance",
    "gross_error_sensitivity",
    "influence_function",
    "influence_profile",
    "median_diagnostics",
    "plateau",
    "relative_efficiency",
    "sandwich",
    "sandwich_s",
    "score_sup",
]
