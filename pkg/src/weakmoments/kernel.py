"""Positive, rapidly decaying weight functions used in every weak expectation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BANDWIDTH = 3.0


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic Gaussian kernel ``exp(-|x|^2 / (2 bandwidth^2))``.

    Unnormalised: the value at the origin is 1.  ``dimension`` fixes the
    length of the argument vectors.
    """

    bandwidth: float = DEFAULT_BANDWIDTH
    dimension: int = 1

    def __post_init__(self):
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def evaluate(self, x) -> np.ndarray:
        """Kernel value at ``x``.

        In one dimension ``x`` may be a scalar or any array of points.  For
        ``dimension >= 2`` the last axis of ``x`` holds the coordinates.
        """
        return np.exp(-0.5 * self.sqnorm(x) / self.bandwidth**2)

    def sqnorm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            if x.ndim == 2 and x.shape[1] == 1:
                x = x[:, 0]
            return x * x
        if x.shape[-1:] != (self.dimension,):
            raise ValueError(
                f"expected points with {self.dimension} coordinates, got shape {x.shape}"
            )
        return np.sum(x * x, axis=-1)

    def squared(self) -> GaussianKernel:
        """The kernel whose values are this kernel's values squared."""
        return GaussianKernel(self.bandwidth / np.sqrt(2.0), self.dimension)

    def power(self, nu: float) -> GaussianKernel:
        """``kernel**nu`` is again Gaussian, with bandwidth ``bandwidth / sqrt(nu)``."""
        if nu <= 0:
            raise ValueError("power must be positive")
        return GaussianKernel(self.bandwidth / np.sqrt(nu), self.dimension)

    def with_dimension(self, dimension: int) -> GaussianKernel:
        return GaussianKernel(self.bandwidth, dimension)
