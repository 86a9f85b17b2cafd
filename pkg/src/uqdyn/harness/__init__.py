"""Experiment harness: configuration, metrics, batch runner, and CLI."""

from .config import ConfigError, config_hash, load_config, resolve_config
from .metrics import (
    ComparisonSummary,
    compare_surrogates,
    ensemble_statistics,
    point_in_time_error,
    relative_l2_errors,
)
from .runner import NumericalFailure, run_experiment, verify_artifacts

__all__ = [
    "ComparisonSummary",
    "ConfigError",
    "NumericalFailure",
    "compare_surrogates",
    "config_hash",
    "ensemble_statistics",
    "load_config",
    "point_in_time_error",
    "relative_l2_errors",
    "resolve_config",
    "run_experiment",
    "verify_artifacts",
]
