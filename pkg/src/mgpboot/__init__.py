"""Spectral bootstrap for multivariate generalized Pareto exceedances, with tail risk metrics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    EmptyExceedanceError,
    FitError,
    MgpBootError,
    ShapeError,
    StatisticalPreconditionError,
)
from .margins import MarginalModel, from_exponential_scale, select_threshold, to_exponential_scale  # noqa: E402
from .rand_core import CorrelationMatrix, RngState, StudentTParams  # noqa: E402
from .spectral import MgpParams, compute_deltas, spectral_bootstrap  # noqa: E402
from .synthetic import GumbelCopula, JointModel, SpectralModel  # noqa: E402
from .trm import estimate, var_empirical, var_theoretical  # noqa: E402

__all__ = [
    "ConfigError",
    "CorrelationMatrix",
    "DataError",
    "EmptyExceedanceError",
    "FitError",
    "GumbelCopula",
    "JointModel",
    "MarginalModel",
    "MgpBootError",
    "MgpParams",
    "RngState",
    "ShapeError",
    "SpectralModel",
    "StatisticalPreconditionError",
    "StudentTParams",
    "compute_deltas",
    "estimate",
    "from_exponential_scale",
    "select_threshold",
    "spectral_bootstrap",
    "to_exponential_scale",
    "var_empirical",
    "var_theoretical",
]
