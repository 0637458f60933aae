"""Numerical integration: adaptive 1-D quadrature, the Faddeeva function and
Gauss-Hermite cubature in two dimensions."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive integration stopped before meeting its tolerance.

    The best value and its error estimate are kept on the exception so callers
    can decide whether to accept them.
    """

    def __init__(self, message: str, value: float, error: float):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    # integration window half-width, in kernel bandwidths
    truncation_radius: float = 12.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be positive")


DEFAULT_SPEC = QuadratureSpec()

# panel rule pair: the high-order value is kept, the difference is the error
LOW_ORDER = 10
HIGH_ORDER = 21


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gauss_legendre(a: float, b: float, panels: int, order: int):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _panel(f, a: float, b: float) -> tuple[float, float]:
    xl, wl = gauss_legendre(LOW_ORDER)
    xh, wh = gauss_legendre(HIGH_ORDER)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(f(mid + half * np.concatenate([xl, xh])), dtype=float)
    low = half * np.dot(wl, vals[:LOW_ORDER])
    high = half * np.dot(wh, vals[LOW_ORDER:])
    return high, abs(high - low)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    breakpoints=(),
) -> tuple[float, float]:
    """Globally adaptive integral of a vectorised ``f`` over the finite interval [a, b].

    Panels are bisected in order of decreasing error estimate until the summed
    estimate drops below ``max(abs_tol, rel_tol * |value|)``.

    Returns
    -------
    value, error_estimate

    Raises
    ------
    QuadratureError
        When ``spec.max_subdivisions`` panels did not reach the tolerance.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration limits must be finite; truncate the window first")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = sorted({a, b, *(float(p) for p in breakpoints if a < p < b)})
    heap = []
    total = err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        v, e = _panel(f, lo, hi)
        total += v
        err += e
        heapq.heappush(heap, (-e, lo, hi, v))
    n_panels = len(heap)
    while err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if n_panels >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence after {n_panels} panels (error estimate {err:.3g})",
                sign * total,
                err,
            )
        neg_e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _panel(f, lo, mid)
        v2, e2 = _panel(f, mid, hi)
        total += v1 + v2 - v
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_panels += 1
    # re-sum to shed accumulated cancellation from the running updates
    total = sum(item[3] for item in heap)
    err = sum(-item[0] for item in heap)
    return sign * total, err


# --------------------------------------------------------------------------
# Faddeeva function


@lru_cache(maxsize=None)
def _weideman_coefficients(n: int):
    m = 2 * n
    k = np.arange(-m + 1, m)
    ell = np.sqrt(n / np.sqrt(2.0))
    t = ell * np.tan(k * np.pi / (2 * m))
    f = np.concatenate([[0.0], np.exp(-t * t) * (ell * ell + t * t)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return ell, np.flipud(a[1 : n + 1])


WEIDEMAN_TERMS = 40
# beyond this modulus the Laplace continued fraction takes over
CF_RADIUS = 15.0
CF_DEPTH = 40


def _weideman(z: np.ndarray) -> np.ndarray:
    ell, a = _weideman_coefficients(WEIDEMAN_TERMS)
    zz = (ell + 1j * z) / (ell - 1j * z)
    p = np.polyval(a, zz)
    return 2.0 * p / (ell - 1j * z) ** 2 + (1.0 / np.sqrt(np.pi)) / (ell - 1j * z)


def _continued_fraction(z: np.ndarray) -> np.ndarray:
    # w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))
    tail = z.copy()
    for k in range(CF_DEPTH, 0, -1):
        tail = z - (k / 2.0) / tail
    return (1j / np.sqrt(np.pi)) / tail


def faddeeva(z) -> np.ndarray:
    """Faddeeva function ``w(z) = exp(-z^2) erfc(-i z)``.

    Weideman's rational expansion (40 terms) inside ``|z| < 15`` and the
    Laplace continued fraction outside; the lower half-plane is reached through
    ``w(z) = 2 exp(-z^2) - w(-z)``.  Relative accuracy is around 1e-13 in the
    closed upper half-plane.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    lower = z.imag < 0
    zu = np.where(lower, -z, z)
    out = np.empty_like(zu)
    far = np.abs(zu) >= CF_RADIUS
    if np.any(far):
        out[far] = _continued_fraction(zu[far])
    if np.any(~far):
        out[~far] = _weideman(zu[~far])
    if np.any(lower):
        out[lower] = 2.0 * np.exp(-z[lower] ** 2) - out[lower]
    return out[0] if scalar else out


def cauchy_weak_moments_faddeeva(mu: float, bandwidth: float) -> tuple[float, float, float]:
    """Weak moments of orders 0, 1, 2 of Cauchy(mu, 1) under a Gaussian kernel.

    With ``z = (mu + i) / (bandwidth sqrt 2)``:
    ``m0 = Re w(z)``, ``m1 = mu m0 - Im w(z)`` and
    ``m2 = bandwidth sqrt(2 pi) / pi - m0 + 2 mu m1 - mu^2 m0``.
    """
    w = faddeeva((mu + 1j) / (bandwidth * np.sqrt(2.0)))
    m0 = w.real
    m1 = mu * m0 - w.imag
    m2 = bandwidth * np.sqrt(2.0 * np.pi) / np.pi - m0 + 2.0 * mu * m1 - mu * mu * m0
    return float(m0), float(m1), float(m2)


# --------------------------------------------------------------------------
# two-dimensional cubature

MIN_HERMITE_ORDER = 4


@lru_cache(maxsize=None)
def _hermite(order: int):
    return np.polynomial.hermite.hermgauss(order)


def cubature_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bandwidth: float,
    hermite_order: int = 80,
) -> float:
    """Integral over the plane of ``f(x, y) * exp(-(x^2 + y^2) / (2 bandwidth^2))``.

    Tensor-product Gauss-Hermite in kernel-standardised coordinates.  ``f`` is
    called once on meshgrid arrays and must itself exclude the Gaussian factor.
    Accurate when ``f`` varies slowly on the scale of the bandwidth; integrands
    with sharp peaks need the density-adapted rules in :mod:`weakmoments.models`.
    """
    if hermite_order < MIN_HERMITE_ORDER:
        raise ValueError(f"hermite_order must be >= {MIN_HERMITE_ORDER}")
    u, w = _hermite(hermite_order)
    scale = np.sqrt(2.0) * bandwidth
    xx, yy = np.meshgrid(scale * u, scale * u, indexing="ij")
    vals = np.asarray(f(xx, yy), dtype=float)
    return float(scale * scale * np.einsum("i,j,ij->", w, w, vals))
