"""
Dynamic maps: jointly fitted, temporally smoothed low-dimensional
configurations for sequences of dissimilarity matrices.
"""
__version__ = "0.1.0"

from .core import ConfigurationSequence, DissimilaritySequence, FitSpec
from .errors import (
    ConfigError,
    DataError,
    DegenerateConfigurationError,
    DivergenceError,
    DomainError,
    DynMapError,
    InvalidHyperparameterError,
    ParseError,
    TemporalDataError,
)
from .optimize import FitResult, OptimizerSettings, fit

__all__ = [
    "ConfigError",
    "ConfigurationSequence",
    "DataError",
    "DegenerateConfigurationError",
    "DissimilaritySequence",
    "DivergenceError",
    "DomainError",
    "DynMapError",
    "FitResult",
    "FitSpec",
    "InvalidHyperparameterError",
    "OptimizerSettings",
    "ParseError",
    "TemporalDataError",
    "fit",
]
