"""Exception hierarchy shared across the package."""


class DynMapError(Exception):
    """Base class for all package errors."""


class ConfigError(DynMapError, ValueError):
    """Invalid configuration, shapes or flags."""


class DataError(DynMapError, ValueError):
    """Input data violates a structural invariant."""


class DomainError(DynMapError, ValueError):
    """Input values fall outside the domain of an operation."""


class TemporalDataError(DataError):
    """An operation needs at least two periods."""


class InvalidHyperparameterError(ConfigError):
    """Hyperparameter outside its admissible range."""


class DegenerateConfigurationError(DomainError):
    """Configuration has no positive interpoint distance."""


class DivergenceError(DynMapError, ArithmeticError):
    """Optimization produced a non-finite cost."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite cost encountered at iteration {iteration}")


class ParseError(DynMapError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
