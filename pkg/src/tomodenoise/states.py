"""Target-state generation: Hilbert-Schmidt-random mixed states, Haar-random
pure states, collective spin operators, one-axis-twisting dynamics, and the
depolarizing channel.

States are plain complex128 arrays. All sampling goes through an explicit
numpy Generator; there is no global RNG anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import hermitianize

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def hs_random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt-random mixed state AA^H / Tr[AA^H], A Ginibre."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    a = rng.standard_normal((d, d))
    b = rng.standard_normal((d, d))
    A = a + 1j * b
    rho = A @ A.conj().T
    return hermitianize(rho / np.trace(rho).real)


def haar_random_ket(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector: first column of a QR-derived Haar unitary.

    The R-diagonal phase fix Lambda = diag(R_aa/|R_aa|) makes the
    distribution exactly unitarily invariant.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    a = rng.standard_normal((d, d))
    b = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(a + 1j * b)
    r00 = R[0, 0]
    phase = r00 / abs(r00) if abs(r00) > 0 else 1.0
    return Q[:, 0] * phase


def haar_random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    """Projector onto a Haar-random pure state."""
    ket = haar_random_ket(d, rng)
    return np.outer(ket, ket.conj())


@dataclass
class CollectiveSpinOps:
    """Collective spin components J_a = sum_i sigma_a^(i) / 2 on L qubits."""

    L: int
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray


@lru_cache(maxsize=8)
def collective_spin(L: int) -> CollectiveSpinOps:
    """Collective spin operators for L qubits (spin-1/2 convention).

    With the 1/2 factor a coherent spin state has QFI = L and the L-qubit
    cat state QFI = L^2, which is what the depth thresholds assume.
    """
    if not 1 <= L <= 6:
        raise ValueError("qubit count must be in [1, 6]")
    d = 2**L
    ops = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}
    out = {}
    for axis, sigma in ops.items():
        J = np.zeros((d, d), dtype=complex)
        for site in range(L):
            term = np.eye(1, dtype=complex)
            for k in range(L):
                term = np.kron(term, sigma if k == site else SIGMA_0)
            J += 0.5 * term
        out[axis] = J
    return CollectiveSpinOps(L=L, jx=out["x"], jy=out["y"], jz=out["z"])


def oat_ket(L: int, t: float) -> np.ndarray:
    """One-axis-twisting ket exp(-i t Jz^2)|+>^(x L).

    Jz is diagonal in the computational basis with eigenvalue
    m(b) = (L - 2 popcount(b))/2, so the evolution is a diagonal phase.
    """
    if not 1 <= L <= 6:
        raise ValueError("qubit count must be in [1, 6]")
    if not 0.0 <= t <= np.pi:
        raise ValueError("time must be in [0, pi]")
    d = 2**L
    m = np.array([(L - 2 * bin(b).count("1")) / 2.0 for b in range(d)])
    plus = np.full(d, 2.0 ** (-L / 2.0), dtype=complex)
    return np.exp(-1j * t * m**2) * plus


def oat_state(L: int, t: float) -> np.ndarray:
    """Density matrix of the one-axis-twisting state at time t."""
    ket = oat_ket(L, t)
    return np.outer(ket, ket.conj())


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """Depolarizing channel (1-p) rho + p I/d."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing probability must be in [0, 1], got {p!r}")
    d = rho.shape[0]
    return (1.0 - p) * rho + p * np.eye(d) / d


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    """Raise ValueError unless rho is Hermitian, unit-trace, and PSD."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"not square: shape {rho.shape}")
    if np.linalg.norm(rho - rho.conj().T) > atol * max(np.linalg.norm(rho), 1.0):
        raise ValueError("not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValueError(f"trace {np.trace(rho).real!r} is not 1")
    w = np.linalg.eigvalsh(hermitianize(rho))
    if w[0] < -atol:
        raise ValueError(f"minimum eigenvalue {w[0]:.3e} below -{atol:.1e}")
