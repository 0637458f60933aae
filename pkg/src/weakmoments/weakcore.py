"""Weak expectations: kernel-weighted moments, transforms and cumulants.

A weak expectation of ``psi`` under a density ``f`` and kernel ``phi`` is
``integral psi(x) phi(x) f(x) dx``; its empirical counterpart averages
``psi(X_i) phi(X_i)``.  Both exist for every polynomial ``psi`` whatever the
tails of ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .kernel import GaussianKernel
from .models import CauchyLocation, ContaminatedModel, DataModel
from .quadrature import (
    DEFAULT_SPEC,
    QuadratureSpec,
    cauchy_weak_moments_faddeeva,
    cubature_2d,
    integrate_1d,
)


@dataclass(frozen=True)
class MomentIndex:
    """A test function ``psi``: a power (d = 1), a monomial multi-index or
    the radial ``|x|^2`` (d >= 2)."""

    kind: str
    order: int | tuple[int, ...] = 0

    def __post_init__(self):
        if self.kind == "power":
            if int(self.order) != self.order or self.order < 0:
                raise ValueError("power must be a nonnegative integer")
        elif self.kind == "multi":
            order = tuple(int(a) for a in self.order)
            if any(a < 0 for a in order):
                raise ValueError("multi-index entries must be nonnegative")
            object.__setattr__(self, "order", order)
        elif self.kind != "radial2":
            raise ValueError(f"unknown moment kind {self.kind!r}")

    @classmethod
    def power(cls, j: int) -> MomentIndex:
        return cls("power", int(j))

    @classmethod
    def multi(cls, *alpha: int) -> MomentIndex:
        return cls("multi", tuple(alpha))

    @classmethod
    def radial2(cls) -> MomentIndex:
        return cls("radial2")

    @classmethod
    def constant(cls, dimension: int) -> MomentIndex:
        return cls.power(0) if dimension == 1 else cls.multi(*([0] * dimension))

    @classmethod
    def parse(cls, token: str) -> MomentIndex:
        """``"2"`` -> power 2, ``"1:0"`` -> multi-index (1, 0), ``"r2"`` -> radial."""
        token = token.strip().lower()
        if token in ("r2", "radial2", "radial"):
            return cls.radial2()
        if ":" in token:
            return cls.multi(*(int(t) for t in token.split(":")))
        return cls.power(int(token))

    @property
    def dimension(self) -> int | None:
        if self.kind == "power":
            return 1
        if self.kind == "multi":
            return len(self.order)
        return None

    @property
    def degree(self) -> int:
        if self.kind == "power":
            return self.order
        if self.kind == "multi":
            return sum(self.order)
        return 2

    def check_dimension(self, dimension: int):
        dim = self.dimension
        if dim is None:
            if dimension < 2:
                raise ValueError("the radial moment needs dimension >= 2")
        elif dim != dimension:
            raise ValueError(f"moment {self} does not match dimension {dimension}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            if x.ndim == 2 and x.shape[1] == 1:
                x = x[:, 0]
            return x**self.order
        if self.kind == "multi":
            return np.prod(x ** np.asarray(self.order, dtype=float), axis=-1)
        return np.sum(x * x, axis=-1)

    def __str__(self) -> str:
        if self.kind == "power":
            return str(self.order)
        if self.kind == "multi":
            return ":".join(str(a) for a in self.order)
        return "r2"


@dataclass(frozen=True)
class MomentSet:
    """Ordered, duplicate-free collection of moment indices."""

    indices: tuple[MomentIndex, ...]

    def __post_init__(self):
        indices = tuple(self.indices)
        if not indices:
            raise ValueError("a moment set needs at least one index")
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate moment indices")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def of(cls, *items) -> MomentSet:
        out = []
        for item in items:
            if isinstance(item, MomentIndex):
                out.append(item)
            elif isinstance(item, str):
                out.append(MomentIndex.parse(item))
            elif isinstance(item, (tuple, list)):
                out.append(MomentIndex.multi(*item))
            else:
                out.append(MomentIndex.power(item))
        return cls(tuple(out))

    @classmethod
    def parse(cls, text: str) -> MomentSet:
        return cls(tuple(MomentIndex.parse(t) for t in text.split(",") if t.strip()))

    @classmethod
    def powers(cls, orders: Sequence[int]) -> MomentSet:
        return cls(tuple(MomentIndex.power(j) for j in orders))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self) -> str:
        return ",".join(str(i) for i in self.indices)

    def check_dimension(self, dimension: int):
        for idx in self.indices:
            idx.check_dimension(dimension)

    def evaluate(self, x) -> np.ndarray:
        """Matrix of test-function values, one column per index."""
        return np.stack([idx(x) for idx in self.indices], axis=-1)


@dataclass(frozen=True)
class WeakMomentVector:
    values: np.ndarray
    moments: MomentSet
    kernel: GaussianKernel
    theta: np.ndarray | None = None

    def __post_init__(self):
        if len(self.values) != len(self.moments):
            raise ValueError("values and moment set differ in length")

    def normalized(self) -> np.ndarray:
        """``m_j / m_0`` view; requires the constant index in the set."""
        const = MomentIndex.constant(self.kernel.dimension)
        try:
            k0 = self.moments.indices.index(const)
        except ValueError:
            raise ValueError("normalising needs the zeroth moment in the set") from None
        return self.values / self.values[k0]


# --------------------------------------------------------------------------
# theoretical weak expectations


def _kernel_for(model: DataModel, kernel: GaussianKernel) -> GaussianKernel:
    if kernel.dimension != model.dimension:
        return kernel.with_dimension(model.dimension)
    return kernel


def weak_expectations(
    model: DataModel,
    kernel: GaussianKernel,
    moments: MomentSet,
    radius: float = DEFAULT_SPEC.truncation_radius,
) -> np.ndarray:
    """Theoretical weak moments for every index of ``moments``.

    Uses the model's density-adapted Gauss-Legendre rule truncated at
    ``radius`` kernel bandwidths; accurate to ~1e-13 on the families here.
    """
    moments.check_dimension(model.dimension)
    kernel = _kernel_for(model, kernel)
    x, w = model.rule(kernel.bandwidth, radius)
    weighted = w * kernel(x)
    return moments.evaluate(x).T @ weighted


def theoretical_weak_moment(
    model: DataModel,
    kernel: GaussianKernel,
    index: MomentIndex,
    method: str = "rule",
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """``integral psi_index(x) phi(x) f_theta(x) dx``.

    ``method`` picks the route: ``"rule"`` (density-adapted Gauss-Legendre,
    the default), ``"adaptive"`` (error-controlled adaptive quadrature, d = 1),
    ``"faddeeva"`` (closed form, Cauchy location, powers 0-2) or
    ``"hermite"`` (Gauss-Hermite cubature, d = 2; only for smooth densities).
    """
    index.check_dimension(model.dimension)
    kernel = _kernel_for(model, kernel)
    if method == "rule":
        return float(weak_expectations(model, kernel, MomentSet((index,)), spec.truncation_radius)[0])
    if method == "adaptive":
        if model.dimension != 1:
            raise ValueError("adaptive route is univariate")
        window = spec.truncation_radius * kernel.bandwidth
        centres = _centres(model)
        value, _ = integrate_1d(
            lambda x: index(x) * kernel(x) * model.density(x),
            -window,
            window,
            spec,
            breakpoints=[*centres, -kernel.bandwidth, 0.0, kernel.bandwidth],
        )
        return value
    if method == "faddeeva":
        if not isinstance(model, CauchyLocation) or index.kind != "power" or index.order > 2:
            raise ValueError("the Faddeeva route covers Cauchy location, powers 0..2")
        return cauchy_weak_moments_faddeeva(model.mu, kernel.bandwidth)[index.order]
    if method == "hermite":
        if model.dimension != 2:
            raise ValueError("Gauss-Hermite route is bivariate")
        return cubature_2d(
            lambda a, b: index(np.stack([a, b], axis=-1)) * model.density(np.stack([a, b], axis=-1)),
            kernel.bandwidth,
        )
    raise ValueError(f"unknown method {method!r}")


def _centres(model: DataModel) -> list[float]:
    if isinstance(model, ContaminatedModel):
        return _centres(model.base) + _centres(model.contaminant)
    return [float(model.loc[0])]


def normalized_moment(model: DataModel, kernel: GaussianKernel, index: MomentIndex) -> float:
    """``m_index / m_0``: the moment of the kernel-tilted, renormalised law."""
    const = MomentIndex.constant(model.dimension)
    m = weak_expectations(model, kernel, MomentSet((const, index)) if index != const else MomentSet((const,)))
    return float(m[-1] / m[0])


def theoretical_weak_cf(model: DataModel, kernel: GaussianKernel, t) -> np.ndarray:
    """Weak characteristic function ``integral exp(i t x) phi(x) f(x) dx`` (d = 1)."""
    if model.dimension != 1:
        raise ValueError("the weak characteristic function is implemented for d = 1")
    t = np.asarray(t, dtype=float)
    x, w = model.rule(kernel.bandwidth, DEFAULT_SPEC.truncation_radius)
    weighted = w * kernel(x)
    out = np.exp(1j * np.multiply.outer(t, x)) @ weighted
    return out


def weak_cgf(model: DataModel, kernel: GaussianKernel, t) -> np.ndarray:
    """Principal-branch log of the weak characteristic function."""
    cf = theoretical_weak_cf(model, kernel, t)
    if np.any(np.abs(cf) == 0.0):
        raise ValueError("weak characteristic function vanishes; log undefined")
    return np.log(cf)


# --------------------------------------------------------------------------
# empirical weak expectations


def as_data(data, dimension: int | None = None) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if dimension is not None:
        got = 1 if x.ndim == 1 else x.shape[1]
        if got != dimension:
            raise ValueError(f"data have dimension {got}, expected {dimension}")
    if len(x) < 1:
        raise ValueError("need at least one observation")
    return x


def empirical_weak_expectation(
    data, kernel: GaussianKernel, psi: MomentIndex | Callable[[np.ndarray], np.ndarray]
) -> float:
    """``(1/n) sum psi(X_i) phi(X_i)``; the kernel weight sits inside the average."""
    x = as_data(data, kernel.dimension)
    return float(np.mean(psi(x) * kernel(x)))


def empirical_weak_moments(data, kernel: GaussianKernel, moments: MomentSet) -> np.ndarray:
    x = as_data(data, kernel.dimension)
    return moments.evaluate(x).T @ kernel(x) / len(x)


def empirical_weak_cf(data, kernel: GaussianKernel, t) -> np.ndarray:
    x = as_data(data, 1)
    t = np.asarray(t, dtype=float)
    return np.exp(1j * np.multiply.outer(t, x)) @ kernel(x) / len(x)


# --------------------------------------------------------------------------
# cumulants


def weak_cumulants(moments) -> np.ndarray:
    """Cumulants ``kappa_0..kappa_J`` from raw weak moments ``m_0..m_J``.

    ``kappa_0 = log m_0`` and, for ``j >= 1``, ``kappa_j`` solves
    ``m_j = sum_{k=1}^{j} C(j-1, k-1) kappa_k m_{j-k}``.  The recursion is
    linear in the moment sequence, so it holds unnormalised.
    """
    m = np.asarray(getattr(moments, "values", moments), dtype=float)
    if m.ndim != 1 or len(m) < 2:
        raise ValueError("need moments m_0..m_J with J >= 1")
    if not m[0] > 0:
        raise ValueError("m_0 must be positive")
    kappa = np.empty_like(m)
    kappa[0] = np.log(m[0])
    for j in range(1, len(m)):
        acc = m[j]
        for k in range(1, j):
            acc -= comb(j - 1, k - 1) * kappa[k] * m[j - k]
        kappa[j] = acc / m[0]
    return kappa


def moments_from_cumulants(kappa) -> np.ndarray:
    """Inverse of :func:`weak_cumulants`."""
    kappa = np.asarray(kappa, dtype=float)
    m = np.empty_like(kappa)
    m[0] = np.exp(kappa[0])
    for j in range(1, len(kappa)):
        m[j] = sum(comb(j - 1, k - 1) * kappa[k] * m[j - k] for k in range(1, j + 1))
    return m


# --------------------------------------------------------------------------
# moment conditions shared by estimators and diagnostics


def _central_step(theta: np.ndarray) -> np.ndarray:
    return 1e-5 * np.maximum(1.0, np.abs(theta))


@dataclass(frozen=True)
class MomentCondition:
    """Weak moment estimating equations for a parametric family.

    Raw form: score ``psi_k(x) phi(x) - m_k(theta)``.  Normalised form:
    ``(psi_k(x) - r_k(theta)) phi(x)`` with ``r_k = m_k / m_0``, i.e. matching
    moments of the kernel-tilted law.  ``family`` supplies the fixed parts of
    the model; only its parameter vector varies.
    """

    family: object
    kernel: GaussianKernel
    moments: MomentSet
    normalized: bool = False
    _const: MomentIndex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.moments.check_dimension(self.family.dimension)
        object.__setattr__(self, "_const", MomentIndex.constant(self.family.dimension))
        if self.kernel.dimension != self.family.dimension:
            object.__setattr__(self, "kernel", self.kernel.with_dimension(self.family.dimension))
        if self.normalized and self._const in self.moments.indices:
            raise ValueError("the zeroth moment is trivially matched after normalising")

    @property
    def n_moments(self) -> int:
        return len(self.moments)

    @property
    def n_params(self) -> int:
        return self.family.n_params

    @property
    def extended(self) -> MomentSet:
        """The moment set with the constant index prepended."""
        return MomentSet((self._const, *self.moments.indices))

    def model(self, theta) -> object:
        return self.family.with_theta(theta)

    def population(self, theta) -> np.ndarray:
        """``m(theta)`` (raw) or ``r(theta)`` (normalised)."""
        if not self.normalized:
            return weak_expectations(self.model(theta), self.kernel, self.moments)
        m = weak_expectations(self.model(theta), self.kernel, self.extended)
        return m[1:] / m[0]

    def sufficient(self, data) -> np.ndarray:
        """Data summary: ``(m0_hat, m_hat...)``; everything the estimators need."""
        return empirical_weak_moments(data, self.kernel, self.extended)

    def mean_score(self, stats: np.ndarray, theta) -> np.ndarray:
        if self.normalized:
            return stats[1:] - self.population(theta) * stats[0]
        return stats[1:] - self.population(theta)

    def scores(self, data, theta) -> np.ndarray:
        """Per-observation score matrix ``(n, K)``."""
        x = as_data(data, self.family.dimension)
        psi = self.moments.evaluate(x)
        k = self.kernel(x)[:, None]
        if self.normalized:
            return (psi - self.population(theta)) * k
        return psi * k - self.population(theta)

    def analytic_jacobian(self, theta) -> np.ndarray:
        """``d population / d theta`` by differentiating under the integral.

        ``dm/dtheta = E[psi phi s_theta]`` with ``s_theta`` the model score,
        all on one quadrature rule.  Agrees with :meth:`jacobian` to ~1e-9.
        """
        model = self.model(theta)
        x, w = model.rule(self.kernel.bandwidth, DEFAULT_SPEC.truncation_radius)
        wk = w * self.kernel(x)
        psi = self.extended.evaluate(x)
        m = psi.T @ wk
        dm = psi.T @ (wk[:, None] * model.score(x))
        if not self.normalized:
            return dm[1:]
        return (dm[1:] - np.outer(m[1:] / m[0], dm[0])) / m[0]

    def jacobian(self, theta) -> np.ndarray:
        """``d population / d theta`` by central differences, shape ``(K, p)``.

        Step ``1e-5 * max(1, |theta_i|)`` per coordinate.
        """
        theta = np.asarray(theta, dtype=float)
        h = _central_step(theta)
        cols = []
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h[i]
            cols.append((self.population(theta + e) - self.population(theta - e)) / (2 * h[i]))
        return np.column_stack(cols)

    def score_jacobian(self, theta) -> np.ndarray:
        """Expected derivative of the score in ``theta`` under ``f_theta``."""
        jac = self.jacobian(theta)
        if self.normalized:
            m0 = weak_expectations(self.model(theta), self.kernel, MomentSet((self._const,)))[0]
            return -m0 * jac
        return -jac

    def score_covariance(self, theta, model: DataModel | None = None) -> np.ndarray:
        """``E[score score^T]`` under ``model`` (default ``f_theta``).

        Second moments of ``psi phi`` are weak moments under the squared kernel.
        """
        model = self.model(theta) if model is None else model
        x, w = model.rule(self.kernel.bandwidth, DEFAULT_SPEC.truncation_radius)
        psi = self.moments.evaluate(x)
        k = self.kernel(x)[:, None]
        pop = self.population(theta)
        if self.normalized:
            s = (psi - pop) * k
            return (s * w[:, None]).T @ s
        # the rule is truncated, so expand the constant part using unit mass
        pk = psi * k
        a = w @ pk
        return (pk * w[:, None]).T @ pk - np.outer(a, pop) - np.outer(pop, a) + np.outer(pop, pop)
