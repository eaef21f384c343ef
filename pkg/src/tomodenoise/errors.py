"""Exception types shared across the package.

Simple precondition violations (bad probabilities, empty inputs, length
mismatches) raise plain ValueError with a descriptive message; the classes
below exist where callers need to distinguish the failure mode or recover
a partial result.
"""

from __future__ import annotations


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes or dimensions."""


class NotHermitianError(ValueError):
    """Matrix fails the Hermiticity tolerance."""


class NotPSDError(ValueError):
    """Matrix has an eigenvalue below the negativity tolerance."""


class FactorizationError(ValueError):
    """Cholesky factorization failed (input not positive definite enough)."""


class SingularFrameError(RuntimeError):
    """Measurement frame is too ill-conditioned to define a POVM."""


class NoConvergenceError(RuntimeError):
    """Iterative solver broke down numerically.

    Carries the last finite iterate's report in ``report`` when available.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BudgetError(ValueError):
    """No integer architecture lands within the parameter-budget tolerance."""


class MissingModelError(FileNotFoundError):
    """A checkpoint path does not exist or fails to parse."""
