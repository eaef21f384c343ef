"""Measurement frames and the two finite-statistics sampling channels."""

import numpy as np
import pytest

from tomodenoise.errors import DimensionMismatchError
from tomodenoise.measurement import (
    FrequencyKind,
    FrequencyVector,
    apply_calibration_bias,
    born_values,
    born_values_batch,
    pauli_basis,
    sample_direct,
    sample_indirect,
    sic_povm,
    sqrt_povm,
)
from tomodenoise.seeding import make_rng
from tomodenoise.states import hs_random_state, oat_state


@pytest.fixture(scope="module")
def sqrt9():
    return sqrt_povm(9, make_rng(7, 0))


def test_sqrt_povm_structure(sqrt9):
    d = 9
    assert len(sqrt9) == d * d
    total = sqrt9.operators.sum(axis=0)
    assert np.allclose(total, np.eye(d), atol=1e-10), "resolves the identity"
    for op in sqrt9.operators[:8]:
        w = np.linalg.eigvalsh(op)
        assert w[0] > -1e-12, "POVM elements are PSD"
    # informationally complete: the Gram matrix really inverts
    assert np.allclose(sqrt9.gram @ sqrt9.gram_inverse, np.eye(d * d), atol=1e-8)


def test_sqrt_povm_seed_determinism():
    a = sqrt_povm(4, make_rng(3, 0)).operators
    b = sqrt_povm(4, make_rng(3, 0)).operators
    assert np.array_equal(a, b)


def test_sic_povm_local_overlaps():
    basis = sic_povm(1)
    assert len(basis) == 4
    assert np.allclose(basis.operators.sum(axis=0), np.eye(2), atol=1e-12)
    # tetrahedral frame: Tr(E_i E_j) = 1/4 on the diagonal, 1/12 off it
    for i in range(4):
        for j in range(4):
            got = np.trace(basis.operators[i] @ basis.operators[j]).real
            want = 0.25 if i == j else 1.0 / 12.0
            assert abs(got - want) < 1e-12


def test_sic_povm_tensor_structure():
    basis = sic_povm(2)
    assert basis.dim == 4 and len(basis) == 16
    assert np.allclose(basis.operators.sum(axis=0), np.eye(4), atol=1e-12)
    assert basis.identity_index is None


def test_pauli_basis_structure():
    L = 2
    basis = pauli_basis(L)
    assert len(basis) == 4**L
    assert basis.identity_index == 0
    assert np.allclose(basis.operators[0], np.eye(2**L))
    # orthogonality: Tr(sigma_i sigma_j) = 2^L delta_ij
    assert np.allclose(basis.gram, (2**L) * np.eye(4**L), atol=1e-12)
    for op in basis.operators:
        assert np.allclose(op, op.conj().T)


def test_born_values_probability_semantics(sqrt9):
    rho = hs_random_state(9, make_rng(1, 1))
    f = born_values(rho, sqrt9)
    assert f.kind is FrequencyKind.PROBABILITY
    assert abs(f.values.sum() - 1.0) < 1e-10
    assert f.values.min() > -1e-12


def test_born_values_mean_value_semantics():
    basis = pauli_basis(2)
    rho = oat_state(2, 0.6)
    f = born_values(rho, basis)
    assert f.kind is FrequencyKind.MEAN_VALUE
    assert abs(f.values[0] - 1.0) < 1e-12, "identity slot"
    assert np.all(np.abs(f.values) <= 1.0 + 1e-12)


def test_born_values_batch_agrees(sqrt9):
    rng = make_rng(2, 2)
    states = np.stack([hs_random_state(9, rng) for _ in range(5)])
    batch = born_values_batch(states, sqrt9)
    for i in range(5):
        assert np.allclose(batch[i], born_values(states[i], sqrt9).values, atol=1e-13)


def test_sample_direct_is_multinomial(sqrt9):
    rho = hs_random_state(9, make_rng(4, 0))
    p = born_values(rho, sqrt9)
    n = 10_000
    f = sample_direct(p, n, make_rng(4, 1))
    counts = f.values * n
    assert np.allclose(counts, np.round(counts), atol=1e-9), "integer counts"
    assert abs(f.values.sum() - 1.0) < 1e-12
    # one-sigma binomial scale per component, averaged; loose 20% band
    spread = np.abs(f.values - p.values).mean()
    expected = np.mean(np.sqrt(p.values * (1 - p.values) / n))
    assert 0.5 * expected < spread < 2.0 * expected


def test_sample_direct_rejects_mean_values():
    f = FrequencyVector(values=np.array([1.0, 0.2]), kind=FrequencyKind.MEAN_VALUE)
    with pytest.raises(ValueError):
        sample_direct(f, 100, make_rng(0))


def test_sample_indirect_noise_scale():
    basis = pauli_basis(2)
    rho = oat_state(2, 0.4)
    p = born_values(rho, basis)
    n = 400
    draws = np.stack(
        [
            sample_indirect(p, n, make_rng(9, k), identity_index=0).values - p.values
            for k in range(4000)
        ]
    )
    assert np.all(draws[:, 0] == 0.0), "identity component is exact"
    # std of every other component is 1/(2 sqrt(N)); 4000 draws pin it to ~1%
    sig = draws[:, 1:].std()
    assert abs(sig - 0.5 / np.sqrt(n)) < 0.02 * (0.5 / np.sqrt(n))


def test_sample_indirect_rejects_probabilities(sqrt9):
    p = born_values(hs_random_state(9, make_rng(5, 0)), sqrt9)
    with pytest.raises(ValueError):
        sample_indirect(p, 100, make_rng(0))


def test_apply_calibration_bias():
    f = FrequencyVector(
        values=np.array([1.0, 0.3, -0.2]), kind=FrequencyKind.MEAN_VALUE
    )
    bias = np.array([0.0, 1e-3, -1e-3])
    g = apply_calibration_bias(f, bias)
    assert np.allclose(g.values, f.values + bias)
    with pytest.raises(DimensionMismatchError):
        apply_calibration_bias(f, np.zeros(5))


def test_apply_calibration_bias_clamps_probabilities():
    f = FrequencyVector(
        values=np.array([0.01, 0.49, 0.5]), kind=FrequencyKind.PROBABILITY
    )
    g = apply_calibration_bias(f, np.array([-0.05, 0.0, 0.0]), clamp=True)
    assert g.values.min() >= 0.0
    assert abs(g.values.sum() - 1.0) < 1e-12
