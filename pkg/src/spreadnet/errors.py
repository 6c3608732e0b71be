"""Exception types shared across the package."""

from __future__ import annotations


class SpreadnetError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SpreadnetError, ValueError):
    """An argument is outside its documented domain."""


class UndefinedThresholdError(SpreadnetError):
    """The epidemic threshold is undefined for a model with zero mean degree."""


class ConvergenceError(SpreadnetError):
    """An iterative solver hit its iteration cap.

    Attributes:
        last: the last iterate produced before giving up.
        iterations: number of iterations performed.
    """

    def __init__(self, message: str, last: float, iterations: int):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class StepSizeError(SpreadnetError):
    """An explicit integrator left the unit interval; the step is too large."""


class InfeasibleError(SpreadnetError):
    """No point satisfies the constraints.

    ``certificate`` lists the identifiers of the constraints that cannot be met
    even at the most favourable corner of the box.
    """

    def __init__(self, message: str, certificate=()):
        super().__init__(message)
        self.certificate = tuple(certificate)


class ThreatInfeasibleError(InfeasibleError):
    """The effective spreading rate is zero while a threshold is active."""
