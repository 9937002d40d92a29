"""Exception hierarchy shared across the package."""


class BifidError(Exception):
    """Base class for all errors raised by bifid."""


class DomainError(BifidError, ValueError):
    """A point lies outside the hypercube it is evaluated on."""


class ConfigError(BifidError, ValueError):
    """Invalid configuration value or file."""


class SizeError(BifidError, ValueError):
    """A requested sample size is impossible."""


class DataError(BifidError, ValueError):
    """Training or feature data contains non-finite values."""


class DegeneracyError(BifidError, ValueError):
    """Training data is degenerate (duplicate points, failed factorization)."""


class DesignError(BifidError, ValueError):
    """High-fidelity points are not a subset of the low-fidelity points."""


class UndefinedFeatureError(BifidError, ValueError):
    """A feature cannot be computed on the given sample."""


class UndefinedCorrelationError(UndefinedFeatureError):
    """A correlation is undefined because one of the inputs has zero variance."""


class StatisticalPowerError(BifidError, ValueError):
    """Too few paired observations for a meaningful test."""


class SchemaError(BifidError, ValueError):
    """Tabular input is missing columns or has an unsupported version."""


class SelectionError(BifidError, ValueError):
    """A selector could not reach a decision."""
