"""Exception types raised across the package."""


class SlopeError(Exception):
    """Base class for all package errors."""


class DomainError(SlopeError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(SlopeError, ValueError):
    """Array shapes do not agree."""


class ConditioningError(SlopeError, RuntimeError):
    """Too many numerically singular draws in a Monte Carlo estimate."""


class ConfigError(SlopeError, ValueError):
    """An experiment configuration failed validation.

    ``reasons`` maps each offending field to a human-readable message so
    callers can report every violation at once.
    """

    def __init__(self, reasons):
        self.reasons = dict(reasons)
        lines = [f"{k}: {v}" for k, v in self.reasons.items()]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
