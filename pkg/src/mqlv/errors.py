"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MqlvError(Exception):
    """Base class for all package-specific failures."""


class InvalidInputError(MqlvError):
    """Bad numeric input (non-finite values, mismatched lengths, ...)."""


class ConfigError(MqlvError):
    """Invalid configuration (bad parameter combination, unknown config key)."""


class CalibrationError(MqlvError):
    """Observed series does not admit a mean-reverting fit."""


class DegenerateDomainError(MqlvError):
    """Sample cloud is constant, so no basis domain can be built from it."""


class SolverFailure(MqlvError):
    """A regularized linear solve failed; carries the failing step and condition."""

    def __init__(self, message: str, step: int | None = None, condition: float | None = None):
        super().__init__(message)
        self.step = step
        self.condition = condition
