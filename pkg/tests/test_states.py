"""State generators: ensembles, collective spin, twisting dynamics."""

import numpy as np
import pytest
import scipy.linalg

from tomodenoise.states import (
    check_density_matrix,
    collective_spin,
    depolarize,
    haar_random_ket,
    haar_random_pure,
    hs_random_state,
    oat_ket,
    oat_state,
)


def test_hs_random_state_is_density_matrix():
    rng = np.random.default_rng(0)
    for d in (2, 9, 16):
        rho = hs_random_state(d, rng)
        check_density_matrix(rho)
        assert abs(np.trace(rho).real - 1.0) < 1e-12


def test_hs_ensemble_mean_purity():
    # E[Tr rho^2] = 2d/(d^2+1) for the Hilbert-Schmidt measure (trace of a
    # square Ginibre block). 4000 samples put the Monte Carlo error near
    # 2e-3 (d=2) and 3e-4 (d=9); the gate is 5 standard errors.
    rng = np.random.default_rng(42)
    for d, tol in ((2, 1.1e-2), (9, 1.5e-3)):
        purity = [
            np.einsum("ij,ji->", rho, rho).real
            for rho in (hs_random_state(d, rng) for _ in range(4000))
        ]
        assert abs(np.mean(purity) - 2 * d / (d * d + 1)) < tol


def test_haar_ket_normalized_and_uniform():
    rng = np.random.default_rng(7)
    d = 5
    kets = [haar_random_ket(d, rng) for _ in range(3000)]
    for psi in kets[:20]:
        assert abs(np.vdot(psi, psi) - 1.0) < 1e-12
    # pairwise overlap |<a|b>|^2 ~ Beta(1, d-1): mean 1/d
    ov = [abs(np.vdot(kets[2 * i], kets[2 * i + 1])) ** 2 for i in range(1500)]
    assert abs(np.mean(ov) - 1 / d) < 0.02


def test_haar_random_pure_is_projector():
    rng = np.random.default_rng(1)
    rho = haar_random_pure(16, rng)
    check_density_matrix(rho)
    assert np.allclose(rho @ rho, rho, atol=1e-12)


def test_collective_spin_algebra():
    ops = collective_spin(3)
    # su(2): [Jx, Jy] = i Jz and cyclic
    assert np.allclose(ops.jx @ ops.jy - ops.jy @ ops.jx, 1j * ops.jz, atol=1e-12)
    assert np.allclose(ops.jy @ ops.jz - ops.jz @ ops.jy, 1j * ops.jx, atol=1e-12)
    # spin-1/2 convention: largest Jz eigenvalue is L/2
    w = np.linalg.eigvalsh(ops.jz)
    assert abs(w[-1] - 1.5) < 1e-12 and abs(w[0] + 1.5) < 1e-12


def test_oat_ket_matches_exponential_oracle():
    # closed-form phases vs scipy.linalg.expm acting on |+>^L
    L = 4
    jz = collective_spin(L).jz
    plus = np.full(2**L, 2.0 ** (-L / 2), dtype=complex)
    for t in (0.0, 0.3, np.pi / 2, 1.7, np.pi):
        psi = oat_ket(L, t)
        assert abs(np.vdot(psi, psi) - 1.0) < 1e-12
        oracle = scipy.linalg.expm(-1j * t * (jz @ jz)) @ plus
        assert abs(abs(np.vdot(psi, oracle)) - 1.0) < 1e-10


def test_oat_ket_at_zero_is_coherent_state():
    psi = oat_ket(3, 0.0)
    assert np.allclose(psi, np.full(8, 8.0**-0.5))


def test_oat_state_is_pure_projector():
    rho = oat_state(4, 0.9)
    psi = oat_ket(4, 0.9)
    assert np.allclose(rho, np.outer(psi, psi.conj()), atol=1e-14)
    check_density_matrix(rho)


def test_depolarize_limits_and_linearity():
    rng = np.random.default_rng(5)
    rho = hs_random_state(4, rng)
    assert np.allclose(depolarize(rho, 0.0), rho)
    assert np.allclose(depolarize(rho, 1.0), np.eye(4) / 4)
    mid = depolarize(rho, 0.3)
    assert abs(np.trace(mid).real - 1.0) < 1e-12
    assert np.allclose(mid, 0.7 * rho + 0.3 * np.eye(4) / 4)


def test_check_density_matrix_rejects_bad_inputs():
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(3, dtype=complex))  # trace 3
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.5, -0.5]).astype(complex))
