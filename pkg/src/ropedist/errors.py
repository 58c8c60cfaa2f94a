"""Exception types shared across the package."""


class RopeDistError(ValueError):
    """Base class for all errors raised by :mod:`ropedist`."""


class ConfigurationError(RopeDistError):
    """Invalid model or method configuration (odd head dim, base <= 1, alpha >= beta, ...)."""


class DimensionError(RopeDistError):
    """Array lengths or bin counts that do not line up."""


class DomainError(RopeDistError):
    """A scalar argument outside its mathematical domain."""


class PlanFormatError(RopeDistError):
    """A scaling-plan file that cannot be parsed."""
