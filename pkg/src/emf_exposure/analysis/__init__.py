"""Post-processing: unit conversion, breakdowns, shares and the exposure estimator."""

from ..units import convert
from .breakdown import (
    COMPONENTS,
    ExposureBreakdown,
    aggregate_session,
    band_occurrence,
    exposure_per_mbps,
    mean_throughput,
    ue_share,
)
from .farfield import far_field_distance
from .fitting import REFERENCE_PARAMS, FitParams, FitResult, estimate_cost, estimate_exposure, fit_double_exponential
from .report import AnalysisReport, analyze
from .stats import Z_95, confidence_interval, z_value

__all__ = [
    "COMPONENTS",
    "REFERENCE_PARAMS",
    "Z_95",
    "AnalysisReport",
    "ExposureBreakdown",
    "FitParams",
    "FitResult",
    "aggregate_session",
    "analyze",
    "band_occurrence",
    "confidence_interval",
    "convert",
    "estimate_cost",
    "estimate_exposure",
    "exposure_per_mbps",
    "far_field_distance",
    "fit_double_exponential",
    "mean_throughput",
    "ue_share",
    "z_value",
]
