"""Hierarchically sparse ARMA estimation.

Fits ARMA(p, q) models with a latent overlapping group penalty over the AR
and MA lag chains, so that model orders are identified during estimation.
"""
from .exceptions import (
    ConvergenceWarning,
    FitError,
    SamplingError,
    SeriesLengthError,
    StabilityError,
)
from .penalty import GroupStructure, build_groups, penalty_value, prox_log, prox_log_split
from .selection import (
    BenchReport,
    PathSpec,
    estimation_error,
    forecast_rmse,
    gen_true_model,
    lambda_path,
    run_table1,
    select_bic,
)
from .series import (
    ArmaParams,
    ResidualTrace,
    TimeSeries,
    forecast,
    grad,
    loss,
    residuals,
    simulate,
)
from .solver import FitConfig, FitResult, fit, objective
from .stability import StabilityRegion, char_roots, is_member, project

__version__ = "0.1.0"

__all__ = [
    "ArmaParams",
    "BenchReport",
    "ConvergenceWarning",
    "FitConfig",
    "FitError",
    "FitResult",
    "GroupStructure",
    "PathSpec",
    "ResidualTrace",
    "SamplingError",
    "SeriesLengthError",
    "StabilityError",
    "StabilityRegion",
    "TimeSeries",
    "build_groups",
    "char_roots",
    "estimation_error",
    "fit",
    "forecast",
    "forecast_rmse",
    "gen_true_model",
    "grad",
    "is_member",
    "lambda_path",
    "loss",
    "objective",
    "penalty_value",
    "project",
    "prox_log",
    "prox_log_split",
    "residuals",
    "run_table1",
    "select_bic",
    "simulate",
]
