"""Informationally complete measurement sets and finite-statistics noise.

Three operator sets are supported: a random square-root POVM (d^2 rank-1
elements), the tensor product of single-qubit tetrahedral SIC-POVMs, and the
tensor Pauli basis. POVM sets carry probability semantics; the Pauli basis
carries mean-value semantics with the identity component fixed at slot 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError, SingularFrameError
from .linalg import hermitian_eig, hermitianize
from .states import SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z, haar_random_ket


class BasisKind(Enum):
    SQRT_POVM = "sqrt_povm"
    SIC_POVM = "sic_povm"
    PAULI = "pauli"


class FrequencyKind(Enum):
    PROBABILITY = "probability"
    MEAN_VALUE = "mean_value"


@dataclass(frozen=True)
class FrequencyVector:
    """Observed frequencies (POVM outcomes) or noisy mean values (Pauli)."""

    values: np.ndarray
    kind: FrequencyKind

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class MeasurementBasis:
    """Ordered Hermitian operator set with its Gram matrix.

    gram[i, j] = Tr(pi_i pi_j); gram_inverse is the pseudo-inverse, which
    coincides with the inverse for the informationally complete sets built
    here. identity_index marks the identity operator's slot for mean-value
    bases (None for POVMs).
    """

    dim: int
    kind: BasisKind
    operators: np.ndarray  # (n, d, d) complex
    gram: np.ndarray  # (n, n) real
    gram_inverse: np.ndarray  # (n, n) real
    identity_index: int | None = None
    # vec'd operators, one row per element; used by born_values and LI
    flat: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.operators)


def _finish_basis(
    kind: BasisKind, ops: np.ndarray, identity_index: int | None = None
) -> MeasurementBasis:
    n, d, _ = ops.shape
    flat = ops.reshape(n, d * d)
    # Tr(pi_i pi_j) = <vec pi_i, vec pi_j> for Hermitian operators
    gram = (flat @ flat.conj().T).real
    gram = 0.5 * (gram + gram.T)
    gram_inverse = np.linalg.pinv(gram, hermitian=True)
    return MeasurementBasis(
        dim=d,
        kind=kind,
        operators=ops,
        gram=gram,
        gram_inverse=gram_inverse,
        identity_index=identity_index,
        flat=flat,
    )


def sqrt_povm(d: int, rng: np.random.Generator, max_attempts: int = 5) -> MeasurementBasis:
    """Square-root POVM from d^2 Haar-random kets.

    pi_i = H^(-1/2) |phi_i><phi_i| H^(-1/2) with H = sum |phi_i><phi_i|.
    Retries with fresh kets (up to max_attempts) if the frame operator H is
    numerically rank-deficient, then raises SingularFrameError.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    for _ in range(max_attempts):
        kets = np.stack([haar_random_ket(d, rng) for _ in range(d * d)], axis=1)
        H = hermitianize(kets @ kets.conj().T)
        eig = hermitian_eig(H)
        if eig.eigenvalues[0] > 1e-12 * eig.eigenvalues[-1]:
            break
    else:
        raise SingularFrameError(
            f"frame operator rank-deficient after {max_attempts} attempts"
        )
    V = eig.eigenvectors
    inv_sqrt = hermitianize((V / np.sqrt(eig.eigenvalues)) @ V.conj().T)
    psi = inv_sqrt @ kets  # columns are H^(-1/2)|phi_i>
    ops = np.einsum("ai,bi->iab", psi, psi.conj())
    return _finish_basis(BasisKind.SQRT_POVM, ops)


def _tensor_expand(ops_a: np.ndarray, ops_b: np.ndarray) -> np.ndarray:
    """All pairwise Kronecker products; index order (i_a major, i_b minor)."""
    na, da, _ = ops_a.shape
    nb, db, _ = ops_b.shape
    out = np.einsum("iac,jbd->ijabcd", ops_a, ops_b)
    return out.reshape(na * nb, da * db, da * db)


# Tetrahedral Bloch vectors of the single-qubit SIC-POVM.
_TETRA = np.array(
    [
        [0.0, 0.0, 1.0],
        [2.0 * np.sqrt(2.0) / 3.0, 0.0, -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, np.sqrt(2.0 / 3.0), -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, -np.sqrt(2.0 / 3.0), -1.0 / 3.0],
    ]
)


def _local_sic() -> np.ndarray:
    paulis = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
    return np.stack(
        [(SIGMA_0 + np.einsum("a,aij->ij", s, paulis)) / 4.0 for s in _TETRA]
    )


def sic_povm(L: int) -> MeasurementBasis:
    """Tensor product of single-qubit tetrahedral SIC-POVMs over L qubits."""
    if not 1 <= L <= 6:
        raise ValueError("qubit count must be in [1, 6]")
    local = _local_sic()
    ops = local
    for _ in range(L - 1):
        ops = _tensor_expand(ops, local)
    return _finish_basis(BasisKind.SIC_POVM, ops)


def pauli_basis(L: int) -> MeasurementBasis:
    """Tensor Pauli strings over L qubits, identity string first.

    Index order is lexicographic in (sigma_0, sigma_x, sigma_y, sigma_z) per
    site, first site most significant, so the all-identity string sits at
    slot 0. Born values of this basis are mean values, not probabilities.
    """
    if not 1 <= L <= 6:
        raise ValueError("qubit count must be in [1, 6]")
    local = np.stack([SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z])
    ops = local
    for _ in range(L - 1):
        ops = _tensor_expand(ops, local)
    return _finish_basis(BasisKind.PAULI, ops, identity_index=0)


def _frequency_kind(basis: MeasurementBasis) -> FrequencyKind:
    if basis.kind is BasisKind.PAULI:
        return FrequencyKind.MEAN_VALUE
    return FrequencyKind.PROBABILITY


def born_values(rho: np.ndarray, basis: MeasurementBasis) -> FrequencyVector:
    """Exact Born values Tr(rho pi_i) for every basis element."""
    if rho.shape != (basis.dim, basis.dim):
        raise DimensionMismatchError(
            f"state shape {rho.shape} does not match basis dimension {basis.dim}"
        )
    vals = (basis.flat @ rho.T.reshape(-1)).real
    if _frequency_kind(basis) is FrequencyKind.PROBABILITY:
        vals = np.maximum(vals, 0.0)
    return FrequencyVector(values=vals, kind=_frequency_kind(basis))


def born_values_batch(states: np.ndarray, basis: MeasurementBasis) -> np.ndarray:
    """Born values for a stack of states; returns (n_states, n_ops)."""
    if states.shape[-2:] != (basis.dim, basis.dim):
        raise DimensionMismatchError(
            f"state stack shape {states.shape} does not match dimension {basis.dim}"
        )
    flat_states = states.swapaxes(-1, -2).reshape(len(states), -1)
    vals = (flat_states @ basis.flat.T).real
    if _frequency_kind(basis) is FrequencyKind.PROBABILITY:
        vals = np.maximum(vals, 0.0)
    return vals


def sample_direct(
    p: FrequencyVector, n_shots: int, rng: np.random.Generator
) -> FrequencyVector:
    """Multinomial frequencies f_i = n_i / N from one N-shot draw."""
    if p.kind is not FrequencyKind.PROBABILITY:
        raise ValueError("direct sampling needs probability semantics")
    if n_shots < 1:
        raise ValueError("shot count must be at least 1")
    vals = p.values
    if vals.min() < -1e-9 or abs(vals.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    pv = np.maximum(vals, 0.0)
    pv = pv / pv.sum()
    counts = rng.multinomial(n_shots, pv)
    return FrequencyVector(values=counts / n_shots, kind=FrequencyKind.PROBABILITY)


def sample_indirect(
    p: FrequencyVector,
    n_shots: int,
    rng: np.random.Generator,
    identity_index: int | None = 0,
) -> FrequencyVector:
    """Mean values with additive Gaussian noise of std 1/(2 sqrt(N)).

    The identity component carries no statistical noise (its value is fixed
    by normalization, not measured); by the Pauli ordering it is slot 0.
    Pass identity_index=None to perturb all slots.
    """
    if p.kind is not FrequencyKind.MEAN_VALUE:
        raise ValueError("indirect sampling needs mean-value semantics")
    if n_shots < 1:
        raise ValueError("shot count must be at least 1")
    noise = rng.standard_normal(len(p.values)) * (0.5 / np.sqrt(n_shots))
    if identity_index is not None:
        noise[identity_index] = 0.0
    return FrequencyVector(values=p.values + noise, kind=p.kind)


def apply_calibration_bias(
    f: FrequencyVector, bias: np.ndarray, clamp: bool = False
) -> FrequencyVector:
    """Add a fixed calibration bias vector to the recorded values.

    The bias models a systematic detector miscalibration: drawn once per
    experiment and applied unchanged to every state. With clamp set and
    probability semantics the result is clipped to [0, inf) and renormalized.
    """
    bias = np.asarray(bias, dtype=float)
    if bias.shape != f.values.shape:
        raise DimensionMismatchError(
            f"bias length {bias.shape} does not match frequency length {f.values.shape}"
        )
    vals = f.values + bias
    if clamp and f.kind is FrequencyKind.PROBABILITY:
        vals = np.maximum(vals, 0.0)
        total = vals.sum()
        vals = vals / total if total > 0 else np.full_like(vals, 1.0 / len(vals))
    return FrequencyVector(values=vals, kind=f.kind)
