"""Semantic exception hierarchy for the exitwalk package."""


class ExitwalkError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ExitwalkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CoefficientError(ExitwalkError, ValueError):
    """A coefficient set violates its declared contract (e.g. sigma below floor)."""


class QuadratureError(ExitwalkError):
    """Adaptive integration failed to reach the requested tolerance.

    Carries the best available estimate and the achieved error bound so
    callers can decide whether to proceed anyway.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved


class InversionError(ExitwalkError):
    """Monotone-function inversion could not bracket or converge on a root."""


class StepLimitError(ExitwalkError):
    """The walk exceeded its step guard without entering a stopping shell."""


class ConfigError(ExitwalkError, ValueError):
    """A run configuration is invalid (unknown preset, bad geometry, ...)."""
