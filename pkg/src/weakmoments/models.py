"""Parametric families, exact samplers and contamination mixtures.

Every family here is an elliptical Student t (Cauchy is ``df = 1``) with an
isotropic scale, in one or two dimensions.  Besides density, score and
sampler, each model supplies a density-adapted quadrature rule: nodes and
weights with ``sum(w * g(x)) ~= integral of g(x) f(x) dx`` for bounded,
smooth ``g``.  The weak-moment machinery integrates against these rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import gammaln

from .quadrature import gauss_legendre

# density-adapted rule resolution
RULE_PANELS = 8
RULE_ORDER = 16
RULE_ANGLES = 64


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _as_points(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dimension == 1:
        if x.ndim == 2 and x.shape[1] == 1:
            return x[:, 0]
        return x
    if x.shape[-1:] != (dimension,):
        raise ValueError(f"expected points with {dimension} coordinates, got shape {x.shape}")
    return x


class _EllipticalT:
    """Shared algebra of the isotropic elliptical t family.

    Subclasses provide ``loc`` (array of length ``dimension``), ``scale`` and
    ``df`` and decide which of these are free parameters.
    """

    dimension: ClassVar[int]
    param_names: ClassVar[tuple[str, ...]]
    location_family: ClassVar[bool] = True

    # implemented by subclasses
    loc: np.ndarray
    scale: float
    df: float

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def _log_norm(self) -> float:
        d, nu = self.dimension, self.df
        return (
            gammaln((nu + d) / 2.0)
            - gammaln(nu / 2.0)
            - 0.5 * d * np.log(nu * np.pi)
            - d * np.log(self.scale)
        )

    def _standardise(self, x):
        x = _as_points(x, self.dimension)
        u = (x - self.loc) / self.scale if self.dimension > 1 else (x - self.loc[0]) / self.scale
        r2 = u * u if self.dimension == 1 else np.sum(u * u, axis=-1)
        return u, r2

    def logpdf(self, x) -> np.ndarray:
        _, r2 = self._standardise(x)
        return self._log_norm() - 0.5 * (self.df + self.dimension) * np.log1p(r2 / self.df)

    def density(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def _score_parts(self, x):
        """Gradients of log f in the location vector and in the scale."""
        u, r2 = self._standardise(x)
        nu, d, s = self.df, self.dimension, self.scale
        factor = (nu + d) / (s * (nu + r2))
        grad_loc = factor[..., None] * u if d > 1 else factor * u
        grad_scale = -d / s + (nu + d) * r2 / (s * (nu + r2))
        return grad_loc, grad_scale

    def sample(self, n: int, seed=None) -> np.ndarray:
        """``n`` i.i.d. draws; shape ``(n,)`` in one dimension, ``(n, d)`` otherwise.

        Univariate Cauchy by the tangent transform, univariate t as a normal
        over a scaled chi-square root, multivariate laws as radius times a
        uniform direction with the radius drawn by inverse CDF.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = as_generator(seed)
        nu = self.df
        if self.dimension == 1:
            if nu == 1.0:
                z = np.tan(np.pi * (rng.random(n) - 0.5))
            else:
                z = rng.standard_normal(n) / np.sqrt(rng.chisquare(nu, n) / nu)
            return self.loc[0] + self.scale * z
        if self.dimension != 2:
            raise NotImplementedError("sampling implemented for d <= 2")
        u = rng.random(n)
        angle = 2.0 * np.pi * rng.random(n)
        # radial CDF 1 - (1 + r^2/nu)^(-nu/2)
        radius = np.sqrt(nu * ((1.0 - u) ** (-2.0 / nu) - 1.0))
        direction = np.column_stack([np.cos(angle), np.sin(angle)])
        return self.loc + self.scale * radius[:, None] * direction

    def rule(self, bandwidth: float | None = None, radius: float = 12.0):
        """Density-adapted cubature nodes and weights.

        The distance from the centre is mapped to ``scale * sqrt(df) * tan(v)``,
        which turns the t density into the bounded weight ``cos(v)^(df-1)``
        (times ``sin v`` in the plane) on a finite ``v`` interval.  Composite
        Gauss-Legendre handles ``v``, the trapezoidal rule the angle.

        Passing the kernel ``bandwidth`` truncates the rule to
        ``|x| <= radius * bandwidth`` and adds panel breaks every bandwidth,
        so the kernel's own variation is resolved whatever the model scale.
        """
        nu, c = self.df, self.scale * np.sqrt(self.df)
        if self.dimension == 1:
            mu = self.loc[0]
            lo, hi = -np.pi / 2, np.pi / 2
            breaks = np.linspace(lo, hi, RULE_PANELS + 1)
            if bandwidth is not None:
                window = radius * bandwidth
                lo = np.arctan((-window - mu) / c)
                hi = np.arctan((window - mu) / c)
                xs = np.arange(-window, window + 0.5 * bandwidth, bandwidth)
                breaks = np.concatenate([breaks, np.arctan((xs - mu) / c)])
            v, w = _panels(breaks, lo, hi)
            const = np.exp(gammaln((nu + 1) / 2.0) - gammaln(nu / 2.0)) / np.sqrt(np.pi)
            return mu + c * np.tan(v), w * const * np.cos(v) ** (nu - 1.0)
        hi = np.pi / 2
        breaks = np.linspace(0.0, hi, RULE_PANELS // 2 + 1)
        n_angles = RULE_ANGLES
        if bandwidth is not None:
            reach = radius * bandwidth + np.linalg.norm(self.loc)
            hi = np.arctan(reach / c)
            rs = np.arange(0.0, reach + 0.5 * bandwidth, bandwidth)
            breaks = np.concatenate([breaks, np.arctan(rs / c)])
            # trapezoid in the angle needs ~ 2x the largest Bessel argument
            beta = reach * np.linalg.norm(self.loc) / bandwidth**2
            n_angles = int(8 * np.ceil((2.0 * beta + 24.0) / 8.0))
        v, w = _panels(breaks, 0.0, hi)
        dist = c * np.tan(v)
        radial_w = w * nu * np.sin(v) * np.cos(v) ** (nu - 1.0)
        a = 2.0 * np.pi * np.arange(n_angles) / n_angles
        unit = np.stack([np.cos(a), np.sin(a)], axis=-1)
        x = self.loc + dist[:, None, None] * unit[None]
        return x.reshape(-1, 2), np.repeat(radial_w / n_angles, n_angles)


def _panels(breaks, lo: float, hi: float):
    cuts = np.unique(np.clip(np.asarray(breaks, dtype=float), lo, hi))
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 1e-12 * (hi - lo)])]
    if cuts[0] > lo:
        cuts = np.concatenate([[lo], cuts])
    if cuts[-1] < hi:
        cuts = np.concatenate([cuts, [hi]])
    x, w = gauss_legendre(RULE_ORDER)
    half = 0.5 * np.diff(cuts)
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _check_scale(s: float):
    if not (np.isfinite(s) and s > 0):
        raise ValueError(f"scale must be positive, got {s}")


@dataclass(frozen=True)
class CauchyLocation(_EllipticalT):
    """Cauchy(mu, 1); the parameter is the location."""

    mu: float = 0.0

    dimension: ClassVar[int] = 1
    param_names: ClassVar[tuple[str, ...]] = ("mu",)
    scale: ClassVar[float] = 1.0
    df: ClassVar[float] = 1.0

    @property
    def loc(self) -> np.ndarray:
        return np.array([self.mu])

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.mu], dtype=float)

    def with_theta(self, theta) -> CauchyLocation:
        (mu,) = np.asarray(theta, dtype=float).ravel()
        return CauchyLocation(float(mu))

    def shifted(self, c) -> CauchyLocation:
        return CauchyLocation(self.mu + float(np.ravel(c)[0]))

    def score(self, x) -> np.ndarray:
        """d log f / d mu = 2 (x - mu) / (1 + (x - mu)^2)."""
        grad_loc, _ = self._score_parts(x)
        return grad_loc[..., None]


@dataclass(frozen=True)
class StudentTLocationScale(_EllipticalT):
    """Student t with ``nu`` degrees of freedom, location ``mu`` and scale ``s``."""

    mu: float = 0.0
    s: float = 1.0
    nu: float = 3.0

    dimension: ClassVar[int] = 1
    param_names: ClassVar[tuple[str, ...]] = ("mu", "s")

    def __post_init__(self):
        _check_scale(self.s)
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    @property
    def loc(self) -> np.ndarray:
        return np.array([self.mu])

    @property
    def scale(self) -> float:
        return self.s

    @property
    def df(self) -> float:
        return self.nu

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.mu, self.s], dtype=float)

    def with_theta(self, theta) -> StudentTLocationScale:
        mu, s = np.asarray(theta, dtype=float).ravel()
        return StudentTLocationScale(float(mu), float(s), self.nu)

    def shifted(self, c) -> StudentTLocationScale:
        return StudentTLocationScale(self.mu + float(np.ravel(c)[0]), self.s, self.nu)

    def rescaled(self, factor: float) -> StudentTLocationScale:
        return StudentTLocationScale(self.mu, self.s * factor, self.nu)

    def score(self, x) -> np.ndarray:
        grad_loc, grad_scale = self._score_parts(x)
        return np.stack([grad_loc, grad_scale], axis=-1)


@dataclass(frozen=True)
class BivariateCauchyLocation(_EllipticalT):
    """Bivariate Cauchy with identity scatter; the parameter is the location vector."""

    mu: tuple[float, float] = (0.0, 0.0)

    dimension: ClassVar[int] = 2
    param_names: ClassVar[tuple[str, ...]] = ("mu1", "mu2")
    scale: ClassVar[float] = 1.0
    df: ClassVar[float] = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        if len(self.mu) != 2:
            raise ValueError("mu must have two components")

    @property
    def loc(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.mu, dtype=float)

    def with_theta(self, theta) -> BivariateCauchyLocation:
        return BivariateCauchyLocation(tuple(np.asarray(theta, dtype=float).ravel()))

    def shifted(self, c) -> BivariateCauchyLocation:
        return BivariateCauchyLocation(tuple(np.asarray(self.mu) + np.asarray(c, dtype=float)))

    def score(self, x) -> np.ndarray:
        grad_loc, _ = self._score_parts(x)
        return grad_loc


@dataclass(frozen=True)
class BivariateT3LocationScale(_EllipticalT):
    """Bivariate t_3 with scatter ``s^2 I``; parameters ``(mu1, mu2, s)``."""

    mu: tuple[float, float] = (0.0, 0.0)
    s: float = 1.0

    dimension: ClassVar[int] = 2
    param_names: ClassVar[tuple[str, ...]] = ("mu1", "mu2", "s")
    df: ClassVar[float] = 3.0

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        if len(self.mu) != 2:
            raise ValueError("mu must have two components")
        _check_scale(self.s)

    @property
    def loc(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def scale(self) -> float:
        return self.s

    @property
    def theta(self) -> np.ndarray:
        return np.array([*self.mu, self.s], dtype=float)

    def with_theta(self, theta) -> BivariateT3LocationScale:
        m1, m2, s = np.asarray(theta, dtype=float).ravel()
        return BivariateT3LocationScale((float(m1), float(m2)), float(s))

    def shifted(self, c) -> BivariateT3LocationScale:
        return BivariateT3LocationScale(tuple(np.asarray(self.mu) + np.asarray(c, dtype=float)), self.s)

    def rescaled(self, factor: float) -> BivariateT3LocationScale:
        return BivariateT3LocationScale(self.mu, self.s * factor)

    def score(self, x) -> np.ndarray:
        grad_loc, grad_scale = self._score_parts(x)
        return np.concatenate([grad_loc, grad_scale[..., None]], axis=-1)


ParametricModel = CauchyLocation | StudentTLocationScale | BivariateCauchyLocation | BivariateT3LocationScale


@dataclass(frozen=True)
class ContaminatedModel:
    """Gross-error mixture ``(1 - epsilon) base + epsilon contaminant``."""

    base: ParametricModel
    contaminant: ParametricModel
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.base.dimension != self.contaminant.dimension:
            raise ValueError("base and contaminant dimensions differ")

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def density(self, x) -> np.ndarray:
        return (1.0 - self.epsilon) * self.base.density(x) + self.epsilon * self.contaminant.density(x)

    def sample(self, n: int, seed=None) -> np.ndarray:
        """Base draws first, then a uniform label per observation and contaminant
        replacements, so ``epsilon = 0`` reproduces the base sample exactly."""
        rng = as_generator(seed)
        x = self.base.sample(n, rng)
        labels = rng.random(n) < self.epsilon
        k = int(labels.sum())
        if k:
            x[labels] = self.contaminant.sample(k, rng)
        return x

    def rule(self, bandwidth: float | None = None, radius: float = 12.0):
        xb, wb = self.base.rule(bandwidth, radius)
        xc, wc = self.contaminant.rule(bandwidth, radius)
        return (
            np.concatenate([xb, xc], axis=0),
            np.concatenate([(1.0 - self.epsilon) * wb, self.epsilon * wc]),
        )


DataModel = ParametricModel | ContaminatedModel


FAMILIES = {
    "cauchy": CauchyLocation,
    "t": StudentTLocationScale,
    "t3": StudentTLocationScale,
    "cauchy2": BivariateCauchyLocation,
    "t3-2d": BivariateT3LocationScale,
}


def make_model(family: str, theta) -> ParametricModel:
    """Build a model from a family name and a flat parameter vector."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    return cls().with_theta(theta)
