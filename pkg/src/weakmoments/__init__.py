"""Kernel-weighted ("weak") moments for heavy-tailed parametric models.

Weak moments ``integral x^j phi(x) f(x) dx`` exist for any density once a
rapidly decaying kernel ``phi`` is attached, so moment and GMM estimators
become available for Cauchy-type models, with bounded, redescending scores.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .estimators import (
    EstimateResult,
    EstimatorConfig,
    IdentifiabilityError,
    WeightingScheme,
    estimate,
)
from .kernel import GaussianKernel
from .models import (
    BivariateCauchyLocation,
    BivariateT3LocationScale,
    CauchyLocation,
    ContaminatedModel,
    StudentTLocationScale,
    make_model,
)
from .quadrature import QuadratureError, QuadratureSpec, faddeeva, integrate_1d
from .reconstruction import GridFunction, rate_experiment, tikhonov_invert
from .robustness import (
    asymptotic_variance,
    diagnose,
    gross_error_sensitivity,
    influence_function,
    median_diagnostics,
    sandwich,
)
from .simharness import MCReport, Scenario, builtin_scenarios, emit_report, run_scenario
from .weakcore import (
    MomentCondition,
    MomentIndex,
    MomentSet,
    empirical_weak_expectation,
    theoretical_weak_moment,
    weak_cumulants,
)

__all__ = [
    "BivariateCauchyLocation",
    "BivariateT3LocationScale",
    "CauchyLocation",
    "ContaminatedModel",
    "EstimateResult",
    "EstimatorConfig",
    "GaussianKernel",
    "GridFunction",
    "IdentifiabilityError",
    "MCReport",
    "MomentCondition",
    "MomentIndex",
    "MomentSet",
    "QuadratureError",
    "QuadratureSpec",
    "Scenario",
    "StudentTLocationScale",
    "WeightingScheme",
    "asymptotic_variance",
    "builtin_scenarios",
    "diagnose",
    "emit_report",
    "empirical_weak_expectation",
    "estimate",
    "faddeeva",
    "gross_error_sensitivity",
    "influence_function",
    "integrate_1d",
    "make_model",
    "median_diagnostics",
    "rate_experiment",
    "run_scenario",
    "sandwich",
    "theoretical_weak_moment",
    "tikhonov_invert",
    "weak_cumulants",
]
