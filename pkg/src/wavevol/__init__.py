"""Wavelet-based realized volatility measures and Realized (Jump-)GARCH models."""

from .errors import (
    AlignmentError,
    ConfigError,
    ConvergenceError,
    DataError,
    NumericError,
    WavevolError,
)
from .estimators import DailyMeasures, EstimatorConfig, estimate_day, jwtsrv, tsrv
from .models import FitResult, ModelData, ModelSpec, compare_models, fit
from .simulator import SimConfig, VolSpec, simulate_days, simulate_realized_garch
from .wavelet import detect_jumps, get_filter, modwt

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ConfigError",
    "ConvergenceError",
    "DailyMeasures",
    "DataError",
    "EstimatorConfig",
    "FitResult",
    "ModelData",
    "ModelSpec",
    "NumericError",
    "SimConfig",
    "VolSpec",
    "WavevolError",
    "compare_models",
    "detect_jumps",
    "estimate_day",
    "fit",
    "get_filter",
    "jwtsrv",
    "modwt",
    "simulate_days",
    "simulate_realized_garch",
    "tsrv",
]
