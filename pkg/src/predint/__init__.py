"""Reliable beta-content predictive intervals for local linear regression."""

from .loess import ErrorSet, LoessModel, cv_errors, fit, predict, select_bandwidth
from .pim import (
    Conventional,
    FixedK,
    PIMConfig,
    SearchConfig,
    VarK,
    interval_bounds,
    predict_interval,
    tune,
)
from .tolerance import Interval, howe_factor

__all__ = [
    "Conventional",
    "ErrorSet",
    "FixedK",
    "Interval",
    "LoessModel",
    "PIMConfig",
    "SearchConfig",
    "VarK",
    "cv_errors",
    "fit",
    "howe_factor",
    "interval_bounds",
    "predict",
    "predict_interval",
    "select_bandwidth",
    "tune",
]

__version__ = "0.1.0"
