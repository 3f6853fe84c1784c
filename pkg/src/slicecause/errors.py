"""Exception hierarchy shared by every module.

CLI exit codes map onto these: ``ValidationError`` -> 2, ``OSError`` -> 3,
``NumericalError`` -> 4.
"""
from __future__ import annotations


class SliceCauseError(Exception):
    """Base class for package errors."""


class ValidationError(SliceCauseError, ValueError):
    """Input violates a documented invariant or file schema."""


class RangeViolationError(ValidationError):
    """A value that must lie in [0, 1] (or another closed range) does not."""


class AlignmentError(ValidationError):
    """Tick axes of two telemetry sources disagree."""


class NumericalError(SliceCauseError, ArithmeticError):
    """A numerical routine could not produce a finite, well-posed result."""


class RankDeficientError(NumericalError):
    """Design matrix does not have full column rank."""


class DivergenceError(NumericalError):
    """Optimisation produced a non-finite objective.

    ``last_finite`` carries the last iterate whose objective was finite.
    """

    def __init__(self, message: str, last_finite=None):
        super().__init__(message)
        self.last_finite = last_finite
