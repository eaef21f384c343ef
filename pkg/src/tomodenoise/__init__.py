"""Finite-statistics quantum state tomography with a learned denoiser.

Simulates informationally complete measurements of few-qubit states,
reconstructs density matrices with classical estimators (linear inversion,
least squares, maximum likelihood), sharpens the reconstructions with a
small convolution + self-attention network acting on Cholesky vectors, and
certifies metrological entanglement through the quantum Fisher information.
"""

from . import denoiser, estimators, linalg, measurement, metrics, pipeline, seeding, states
from .errors import (
    BudgetError,
    DimensionMismatchError,
    FactorizationError,
    MissingModelError,
    NoConvergenceError,
    NotHermitianError,
    NotPSDError,
    SingularFrameError,
)

__version__ = "0.1.0"

__all__ = [
    "denoiser",
    "estimators",
    "linalg",
    "measurement",
    "metrics",
    "pipeline",
    "seeding",
    "states",
    "BudgetError",
    "DimensionMismatchError",
    "FactorizationError",
    "MissingModelError",
    "NoConvergenceError",
    "NotHermitianError",
    "NotPSDError",
    "SingularFrameError",
]
