"""Cholesky-factor vectorization.

A d x d lower-triangular factor C with real diagonal packs into a real
vector of length d^2 with layout

    [ diagonal (d) | strict lower real parts, row-major (d(d-1)/2)
                   | strict lower imaginary parts, row-major (d(d-1)/2) ]

The packing is a bijection, and the Euclidean norm of the vector equals the
Frobenius norm of the factor, so vector-side mean squared errors equal
matrix-side Hilbert-Schmidt expressions exactly.
"""

from __future__ import annotations

import math

import numpy as np


def _lower_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    return np.tril_indices(d, k=-1)


def pack_cholesky(C: np.ndarray) -> np.ndarray:
    """Flatten a lower-triangular factor into its length-d^2 real vector."""
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {C.shape}")
    d = C.shape[0]
    scale = max(float(np.abs(C).max()), 1.0)
    if d > 1 and np.abs(np.triu(C, k=1)).max() > 1e-12 * scale:
        raise ValueError("matrix is not lower-triangular")
    diag = np.diagonal(C)
    if np.abs(diag.imag).max() > 1e-12 * scale:
        raise ValueError("diagonal is not real")
    rows, cols = _lower_indices(d)
    lower = C[rows, cols]
    return np.concatenate([diag.real, lower.real, lower.imag])


def unpack_cholesky(v: np.ndarray) -> np.ndarray:
    """Inverse of pack_cholesky."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a flat real vector")
    d = math.isqrt(len(v))
    if d * d != len(v):
        raise ValueError(f"length {len(v)} is not a perfect square")
    n_off = d * (d - 1) // 2
    C = np.zeros((d, d), dtype=complex)
    C[np.diag_indices(d)] = v[:d]
    rows, cols = _lower_indices(d)
    C[rows, cols] = v[d : d + n_off] + 1j * v[d + n_off :]
    return C


def pack_batch(Cs: np.ndarray) -> np.ndarray:
    """pack_cholesky over a stack of factors; returns (n, d^2)."""
    n, d, _ = Cs.shape
    rows, cols = _lower_indices(d)
    diag = np.diagonal(Cs, axis1=1, axis2=2).real
    lower = Cs[:, rows, cols]
    return np.concatenate([diag, lower.real, lower.imag], axis=1)


def unpack_batch(V: np.ndarray) -> np.ndarray:
    """unpack_cholesky over a stack of vectors; returns (n, d, d)."""
    n, D = V.shape
    d = math.isqrt(D)
    if d * d != D:
        raise ValueError(f"length {D} is not a perfect square")
    n_off = d * (d - 1) // 2
    Cs = np.zeros((n, d, d), dtype=complex)
    idx = np.arange(d)
    Cs[:, idx, idx] = V[:, :d]
    rows, cols = _lower_indices(d)
    Cs[:, rows, cols] = V[:, d : d + n_off] + 1j * V[:, d + n_off :]
    return Cs
