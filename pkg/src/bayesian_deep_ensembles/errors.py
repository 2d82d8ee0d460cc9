"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or network layout."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation expects."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during a numeric update."""


class TrainingError(RuntimeError):
    """Training of a single network diverged."""


class EnsembleError(RuntimeError):
    """Training of an ensemble member failed."""


class DatasetParseError(ValueError):
    """A delimited data file could not be parsed."""
