"""Exception hierarchy shared across the package."""


class GridlightError(Exception):
    """Base class for all package errors."""


class ConfigError(GridlightError):
    """Invalid configuration value (zero dimension, bad range, ...)."""


class ValidationError(GridlightError):
    """A serialized artifact failed schema or referential validation."""


class InvalidActionError(GridlightError):
    """An agent requested a phase outside the action set."""


class ShapeError(GridlightError):
    """Mismatched array shapes or lengths."""


class MetricUndefinedError(GridlightError):
    """A metric was requested on a state where it has no value."""


class NumericError(GridlightError):
    """Non-finite values encountered where finiteness is required."""
