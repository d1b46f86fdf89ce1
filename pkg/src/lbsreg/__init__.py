"""Length-biased Birnbaum-Saunders distribution and regression model."""

__version__ = "0.1.0"

from .distribution import LbsParams, cdf, hazard, log_pdf, pdf, quantile, sample, survival
from .regression import FitOptions, FitResult, RegressionSpec, fit
from .shape import classify_modes

__all__ = [
    "__version__",
    "LbsParams",
    "RegressionSpec",
    "FitOptions",
    "FitResult",
    "cdf",
    "classify_modes",
    "fit",
    "hazard",
    "log_pdf",
    "pdf",
    "quantile",
    "sample",
    "survival",
]
