"""Reference laws, bootstrap calibration, interpretability indices and reports."""

from .bootstrap import (
    BootstrapLimit,
    BootstrapResult,
    RadiusScanRow,
    bootstrap_lower_limit,
    bootstrap_null,
    default_radius_grid,
)
from .indices import NStarResult, PiStarResult, aic_bic, classical_power, n_star, pi_star
from .reference import (
    ReferenceDistribution,
    chi_square_cdf,
    chi_square_quantile,
    critical_value,
    qq_data,
    regularized_gamma_p,
)
from .report import SCHEMA_VERSION, InferenceReport, asymptotic_lower_limit, build_report

__all__ = [
    "BootstrapLimit",
    "BootstrapResult",
    "InferenceReport",
    "NStarResult",
    "PiStarResult",
    "RadiusScanRow",
    "ReferenceDistribution",
    "SCHEMA_VERSION",
    "aic_bic",
    "asymptotic_lower_limit",
    "bootstrap_lower_limit",
    "bootstrap_null",
    "build_report",
    "chi_square_cdf",
    "chi_square_quantile",
    "classical_power",
    "critical_value",
    "default_radius_grid",
    "n_star",
    "pi_star",
    "qq_data",
    "regularized_gamma_p",
]
