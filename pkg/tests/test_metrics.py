"""Distance and certificate checks against closed forms and a sqrtm oracle."""

import math

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from tomodenoise.denoiser import pack_cholesky
from tomodenoise.errors import DimensionMismatchError
from tomodenoise.linalg import cholesky_factor
from tomodenoise.metrics import (
    bures_distance,
    fidelity,
    hs_distance_sq,
    optimal_axis_qfi,
    qfi,
    sqrt_fidelity,
)
from tomodenoise.seeding import make_rng
from tomodenoise.states import (
    collective_spin,
    depolarize,
    haar_random_pure,
    hs_random_state,
    oat_state,
)

KET0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
KET1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


def test_hs_distance_closed_forms():
    assert hs_distance_sq(KET0, KET0) == 0.0
    assert abs(hs_distance_sq(KET0, KET1) - 2.0) < 1e-15
    rng = make_rng(50, 0)
    for d in (2, 9, 16):
        tau = haar_random_pure(d, rng=rng)
        eye = np.eye(d) / d
        assert abs(hs_distance_sq(tau, eye) - (1.0 - 1.0 / d)) < 1e-12
        A, B = hs_random_state(d, rng), hs_random_state(d, rng)
        assert abs(hs_distance_sq(A, B) - hs_distance_sq(B, A)) < 1e-14
    with pytest.raises(DimensionMismatchError):
        hs_distance_sq(np.eye(2), np.eye(3))


def test_fidelity_closed_forms():
    assert abs(fidelity(KET0, KET0) - 1.0) < 1e-12
    assert fidelity(KET0, KET1) < 1e-15
    assert abs(fidelity(KET0, np.eye(2) / 2) - 0.5) < 1e-12


def test_fidelity_against_sqrtm_oracle():
    # independent route: scipy matrix square roots, no shared eigensolver path
    rng = make_rng(51, 0)
    for d in (3, 5, 9):
        A, B = hs_random_state(d, rng), hs_random_state(d, rng)
        rA = scipy.linalg.sqrtm(A)
        oracle = float(np.trace(scipy.linalg.sqrtm(rA @ B @ rA)).real) ** 2
        assert abs(fidelity(A, B) - oracle) < 1e-9
        assert abs(sqrt_fidelity(A, B) ** 2 - fidelity(A, B)) < 1e-12


def test_fidelity_symmetry_and_range():
    rng = make_rng(52, 0)
    for _ in range(20):
        A, B = hs_random_state(9, rng), hs_random_state(9, rng)
        f = fidelity(A, B)
        assert 0.0 <= f <= 1.0 + 1e-9
        assert abs(f - fidelity(B, A)) <= 1e-9


def test_bures_closed_forms():
    assert abs(bures_distance(KET0, KET0)) < 1e-12
    assert abs(bures_distance(KET0, KET1) - 2.0) < 1e-12


def test_bures_bounded_by_factor_distance():
    # 10^4 random pairs: 2 - 2 sqrt(F) never exceeds the squared Frobenius
    # distance of the exact (eps=0) Cholesky factors
    rng = make_rng(53, 0)
    dims = (2, 9, 16)
    for i in range(10**4):
        d = dims[i % 3]
        A, B = hs_random_state(d, rng), hs_random_state(d, rng)
        CA, CB = cholesky_factor(A, eps=0.0), cholesky_factor(B, eps=0.0)
        bound = float(np.linalg.norm(CA - CB) ** 2)
        assert bures_distance(A, B) <= bound + 1e-12


def test_mse_identity_on_cholesky_vectors():
    # the packing is an isometry, so vector MSE = factor HS distance exactly
    rng = make_rng(54, 0)
    dims = (2, 9, 16)
    for i in range(1000):
        d = dims[i % 3]
        CA = cholesky_factor(hs_random_state(d, rng), eps=0.0)
        CB = cholesky_factor(hs_random_state(d, rng), eps=0.0)
        lhs = float(np.linalg.norm(CA - CB) ** 2)
        rhs = float(np.sum((pack_cholesky(CA) - pack_cholesky(CB)) ** 2))
        assert abs(lhs - rhs) < 1e-12


def test_qfi_maximally_mixed_is_zero():
    spin = collective_spin(3)
    assert qfi(np.eye(8) / 8, spin.jx) == 0.0


def test_qfi_pure_state_is_four_variances():
    rng = make_rng(55, 0)
    spin = collective_spin(3)
    for G in (spin.jx, spin.jy, spin.jz):
        for _ in range(5):
            psi = haar_random_pure(8, rng=rng)
            mean = np.trace(psi @ G).real
            var = np.trace(psi @ G @ G).real - mean**2
            assert abs(qfi(psi, G) - 4.0 * var) <= 1e-8


def test_qfi_ghz_along_x():
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    kp = km = np.array([1.0])
    for _ in range(4):
        kp = np.kron(kp, plus)
        km = np.kron(km, minus)
    ghz = (kp + km) / math.sqrt(2)
    rho = np.outer(ghz, ghz.conj())
    assert abs(qfi(rho, collective_spin(4).jx) - 16.0) < 1e-9


def test_qfi_unitary_invariance():
    rng = make_rng(56, 0)
    spin = collective_spin(3)
    rho = hs_random_state(8, rng)
    for seed in range(3):
        U = scipy.stats.unitary_group.rvs(8, random_state=seed)
        before = qfi(rho, spin.jz)
        after = qfi(U @ rho @ U.conj().T, U @ spin.jz @ U.conj().T)
        assert abs(before - after) < 1e-8


def test_optimal_axis_on_product_state():
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    ket = np.array([1.0])
    for _ in range(4):
        ket = np.kron(ket, plus)
    report = optimal_axis_qfi(np.outer(ket, ket.conj()))
    assert abs(report.qfi - 4.0) < 1e-9
    assert abs(report.normalized - 1.0) < 1e-9
    assert report.depth == 1
    assert abs(report.direction[0]) < 1e-8, "axis orthogonal to the mean spin"
    assert abs(np.linalg.norm(report.direction) - 1.0) < 1e-12


def test_optimal_axis_on_cat_state():
    report = optimal_axis_qfi(oat_state(4, math.pi / 2))
    assert abs(report.qfi - 16.0) < 1e-8
    assert abs(report.normalized - 4.0) < 1e-8
    assert report.depth == 4
    assert np.allclose(report.direction, [1.0, 0.0, 0.0], atol=1e-8)


def test_optimal_axis_on_fully_depolarized_cat():
    report = optimal_axis_qfi(depolarize(oat_state(4, math.pi / 2), 1.0))
    assert report.qfi < 1e-12
    assert report.depth == 1


def test_optimal_axis_on_coherent_spin_states():
    # any product of identical single-qubit states: transverse variances L/4,
    # so the best axis gives exactly L
    rng = make_rng(57, 0)
    for _ in range(5):
        theta, phi = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        q = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
        ket = np.array([1.0])
        for _ in range(4):
            ket = np.kron(ket, q)
        report = optimal_axis_qfi(np.outer(ket, ket.conj()))
        assert abs(report.normalized - 1.0) < 1e-9
        assert report.depth == 1


def test_qfi_report_invariants_on_random_states():
    rng = make_rng(58, 0)
    for _ in range(10):
        rho = hs_random_state(16, rng)
        report = optimal_axis_qfi(rho)
        assert 0.0 <= report.qfi <= 16.0 + 1e-9
        assert abs(np.linalg.norm(report.direction) - 1.0) < 1e-12
        expected_depth = 1
        for k in range(3, -1, -1):
            if report.qfi > 4.0 * k:
                expected_depth = k + 1
                break
        assert report.depth == expected_depth
    with pytest.raises(DimensionMismatchError):
        optimal_axis_qfi(np.eye(3) / 3)
