"""Dense complex-matrix kernel: Hermitian eigendecomposition, PSD matrix
square root, and Cholesky factorization with positivity repair.

All other modules build on these three primitives. Everything is double
precision and operates on plain complex128 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FactorizationError,
    NoConvergenceError,
    NotHermitianError,
    NotPSDError,
)

# Relative Frobenius tolerance for treating a matrix as Hermitian.
HERMITICITY_RTOL = 1e-8


def hermitianize(M: np.ndarray) -> np.ndarray:
    """(M + M^H)/2: absorb rounding asymmetry before spectral calls."""
    return 0.5 * (M + M.conj().swapaxes(-1, -2))


def _assert_hermitian(M: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    asym = np.linalg.norm(M - M.conj().T)
    if asym > HERMITICITY_RTOL * max(scale, 1e-300):
        raise NotHermitianError(
            f"matrix is not Hermitian: |M - M^H| = {asym:.3e} vs scale {scale:.3e}"
        )


@dataclass
class HermitianEig:
    """Spectral decomposition M = V diag(w) V^H with w ascending."""

    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns are eigenvectors


def hermitian_eig(M: np.ndarray) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    Raises NotHermitianError when the Hermiticity tolerance is violated and
    NoConvergenceError if the underlying iteration fails.
    """
    _assert_hermitian(M)
    try:
        w, V = np.linalg.eigh(hermitianize(M))
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"eigendecomposition failed: {exc}") from exc
    return HermitianEig(eigenvalues=w, eigenvectors=V)


def matrix_sqrt_psd(M: np.ndarray, neg_tol: float = 1e-8) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Eigenvalues in [-neg_tol, 0) are clamped to zero; anything below
    -neg_tol raises NotPSDError.
    """
    eig = hermitian_eig(M)
    w = eig.eigenvalues
    if w[0] < -neg_tol:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} below -{neg_tol:.1e}")
    V = eig.eigenvectors
    root = V * np.sqrt(np.maximum(w, 0.0))
    return hermitianize(root @ V.conj().T)


def cholesky_factor(rho: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Lower-triangular C with CC^H = (rho + eps*I)/(1 + eps*d).

    The uniform admixture keeps the factor well defined for rank-deficient
    states while preserving unit trace. The diagonal of C is real and
    nonnegative. Raises FactorizationError if the repaired matrix is still
    not positive definite.
    """
    _assert_hermitian(rho)
    d = rho.shape[0]
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"expected unit trace, got {tr!r}")
    repaired = (hermitianize(rho) + eps * np.eye(d)) / (1.0 + eps * d)
    try:
        C = np.linalg.cholesky(repaired)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"state not positive definite after eps={eps:g} repair"
        ) from exc
    # LAPACK leaves the diagonal real positive; pin it exactly real.
    idx = np.diag_indices(d)
    C[idx] = C[idx].real
    return C
