"""Classical tomographic estimators.

Linear inversion (Gram-matrix pseudo-inverse plus eigenvalue repair),
least-squares via monotone accelerated projected gradient, maximum
likelihood via the diluted R rho R fixed point, and the optimal
depolarization interpolation of an MLE ensemble toward the maximally
mixed state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError, NoConvergenceError
from .linalg import hermitian_eig, hermitianize
from .measurement import (
    BasisKind,
    FrequencyKind,
    FrequencyVector,
    MeasurementBasis,
    born_values,
)


class Method(Enum):
    LI = "li"
    LSE = "lse"
    MLE = "mle"
    MLE_DEPOLARIZED = "mle_depolarized"


@dataclass
class EstimatorReport:
    """Reconstruction output plus solver diagnostics.

    residual is the Euclidean norm of (observed values - Born values of the
    returned state). projected records whether negativity repair fired.
    history, when present, holds the per-iteration objective (LSE) or
    log-likelihood (MLE) of accepted iterates.
    """

    state: np.ndarray
    method: Method
    iterations: int
    residual: float
    projected: bool
    converged: bool = True
    history: list = field(default_factory=list, repr=False)


def _redistribute_negative(w: np.ndarray) -> np.ndarray:
    """Zero negative eigenvalues, spreading each deficit over the rest.

    Input ascending with sum ~ 1. Processing in ascending order, zeroing the
    most negative entry and shifting its value uniformly onto the remaining
    (not yet zeroed) entries, is exactly the Euclidean projection of the
    spectrum onto the probability simplex.
    """
    w = w.copy()
    n = len(w)
    for i in range(n - 1):
        if w[i] >= 0.0:
            break
        w[i + 1 :] += w[i] / (n - i - 1)
        w[i] = 0.0
    return w


def _project_spectrum(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Eigenvalue-repaired state and the most negative raw eigenvalue."""
    eig = hermitian_eig(M)
    w = eig.eigenvalues
    if w[0] >= 0.0:
        return M, w[0]
    w_fixed = _redistribute_negative(w)
    V = eig.eigenvectors
    return hermitianize((V * w_fixed) @ V.conj().T), w[0]


def project_to_physical(H: np.ndarray) -> np.ndarray:
    """Closest density matrix to a Hermitian unit-trace matrix in 2-norm."""
    tr = np.trace(H).real
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"expected unit trace, got {tr!r}")
    state, _ = _project_spectrum(H)
    return state


def clip_to_physical(H: np.ndarray) -> np.ndarray:
    """Zero the negative eigenvalues of a Hermitian matrix and rescale.

    Unlike project_to_physical, the clipped mass is removed by dividing
    the surviving spectrum by its own sum instead of shifting it onto the
    other eigenvalues. Not the 2-norm-closest state; every positive
    eigenvalue shrinks by the same factor, so overlap with any fixed pure
    state drops by exactly the clipped fraction. Kept as the baseline
    repair for the shot-noise fidelity table, which is defined in terms
    of this rescaling.
    """
    eig = hermitian_eig(hermitianize(H))
    w = np.clip(eig.eigenvalues, 0.0, None)
    mass = w.sum()
    if mass <= 0.0:
        raise ValueError("no positive spectral mass to keep")
    V = eig.eigenvectors
    return hermitianize((V * (w / mass)) @ V.conj().T)


def _check_length(f: FrequencyVector, basis: MeasurementBasis) -> None:
    if len(f.values) != len(basis.operators):
        raise DimensionMismatchError(
            f"frequency length {len(f.values)} vs basis size {len(basis.operators)}"
        )


def _residual(f: FrequencyVector, state: np.ndarray, basis: MeasurementBasis) -> float:
    return float(np.linalg.norm(f.values - born_values(state, basis).values))


def raw_inversion(f: FrequencyVector, basis: MeasurementBasis) -> np.ndarray:
    """Hermitized, trace-renormalized Gram inversion, possibly not PSD.

    raw = sum_i (G^-1 f)_i pi_i. No eigenvalue repair; callers choose one.
    """
    _check_length(f, basis)
    coeff = basis.gram_inverse @ f.values
    raw = np.tensordot(coeff, basis.operators, axes=(0, 0))
    raw = hermitianize(raw)
    tr = np.trace(raw).real
    if abs(tr) < 1e-12:
        raise ValueError("raw reconstruction has vanishing trace")
    return raw / tr


def linear_inversion(f: FrequencyVector, basis: MeasurementBasis) -> EstimatorReport:
    """Gram-inverse reconstruction followed by physical projection.

    The raw inversion is trace renormalized and projected to the closest
    PSD unit-trace state. The projected flag is set when the raw matrix
    had an eigenvalue below -1e-12.
    """
    raw = raw_inversion(f, basis)
    state, min_eig = _project_spectrum(raw)
    return EstimatorReport(
        state=state,
        method=Method.LI,
        iterations=0,
        residual=_residual(f, state, basis),
        projected=bool(min_eig < -1e-12),
    )


def lse_estimate(
    f: FrequencyVector,
    basis: MeasurementBasis,
    tol: float = 1e-10,
    max_iter: int = 3000,
) -> EstimatorReport:
    """Least squares over density matrices by accelerated projected gradient.

    Minimizes ||f - Tr(pi rho)||^2 with a monotone FISTA scheme: step size
    1/(2 lambda_max(Gram)) (the exact Lipschitz constant), acceleration
    point projected each iteration, and the iterate kept only when the
    objective does not increase. A rejected step restarts the momentum
    (the overshoot means the acceleration left the quadratic's basin), which
    restores the fast tail on strongly convex instances. The gradient is
    projected onto the traceless subspace first so every iterate stays
    unit-trace and the physical projection reduces to eigenvalue repair.
    """
    _check_length(f, basis)
    d = basis.dim
    ops = basis.operators
    target = f.values
    eye = np.eye(d) / d

    def objective(rho: np.ndarray) -> float:
        vals = (basis.flat @ rho.T.reshape(-1)).real
        return float(np.sum((vals - target) ** 2))

    def gradient(rho: np.ndarray) -> np.ndarray:
        vals = (basis.flat @ rho.T.reshape(-1)).real
        g = 2.0 * np.tensordot(vals - target, ops, axes=(0, 0))
        g = hermitianize(g)
        return g - (np.trace(g).real / d) * np.eye(d)

    lipschitz = 2.0 * float(np.linalg.eigvalsh(basis.gram)[-1])
    step = 1.0 / lipschitz

    x = eye.copy()
    y = x
    fx = objective(x)
    t_momentum = 1.0
    history = [fx]
    projected_any = False
    stall = 0
    iterations = 0

    for iterations in range(1, max_iter + 1):
        z_raw = hermitianize(y - step * gradient(y))
        z, min_eig = _project_spectrum(z_raw)
        projected_any = projected_any or min_eig < -1e-12
        if not np.all(np.isfinite(z)):
            best = EstimatorReport(
                state=x, method=Method.LSE, iterations=iterations,
                residual=float(np.sqrt(max(fx, 0.0))), projected=projected_any,
                converged=False, history=history,
            )
            raise NoConvergenceError("least-squares iterate became non-finite", best)
        fz = objective(z)
        if fz <= fx:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2))
            y = z + ((t_momentum - 1.0) / t_new) * (z - x)
            x_new, f_new = z, fz
        else:
            # overshoot: restart the momentum from the last accepted iterate
            x_new, f_new, t_new, y = x, fx, 1.0, x
        gain = fx - f_new
        x, fx, t_momentum = x_new, f_new, t_new
        history.append(fx)
        # momentum can stall for a step or two before progressing again
        stall = stall + 1 if gain < tol else 0
        if stall >= 3:
            break

    return EstimatorReport(
        state=x,
        method=Method.LSE,
        iterations=iterations,
        residual=float(np.sqrt(max(fx, 0.0))),
        projected=projected_any,
        converged=stall >= 3,
        history=history,
    )


_LOG_FLOOR = 1e-12


def _log_likelihood(freqs: np.ndarray, probs: np.ndarray) -> float:
    safe = np.maximum(probs, _LOG_FLOOR)
    terms = np.where(freqs > 0.0, freqs * np.log(safe), 0.0)
    return float(terms.sum())


def mle_estimate(
    f: FrequencyVector,
    basis: MeasurementBasis,
    tol: float = 1e-9,
    max_iter: int = 5000,
) -> EstimatorReport:
    """Maximum likelihood by the diluted R rho R fixed point.

    R(rho) = sum_i (f_i / Tr(pi_i rho)) pi_i. A full step rho -> N[R rho R]
    is tried first; if the log-likelihood would decrease, the step is diluted
    to R_a = (I + a R)/(1 + a) with a halved until the likelihood is
    non-decreasing. Stops when the accepted gain drops below tol.
    """
    if basis.kind is BasisKind.PAULI or f.kind is not FrequencyKind.PROBABILITY:
        raise ValueError("maximum likelihood requires a POVM basis with frequencies")
    _check_length(f, basis)
    freqs = f.values
    if freqs.min() < -1e-9 or abs(freqs.sum() - 1.0) > 1e-6:
        raise ValueError("not a probability vector")
    freqs = np.maximum(freqs, 0.0)

    d = basis.dim
    ops = basis.operators
    eye = np.eye(d)
    rho = eye / d
    probs = (basis.flat @ rho.T.reshape(-1)).real
    ll = _log_likelihood(freqs, probs)
    history = [ll]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        ratios = freqs / np.maximum(probs, _LOG_FLOOR)
        R = hermitianize(np.tensordot(ratios, ops, axes=(0, 0)))

        accepted = None
        alpha = None  # full R rho R step first, then diluted
        while True:
            Rstep = R if alpha is None else (eye + alpha * R) / (1.0 + alpha)
            cand = Rstep @ rho @ Rstep
            cand = hermitianize(cand)
            tr = np.trace(cand).real
            if tr > _LOG_FLOOR and np.all(np.isfinite(cand)):
                cand = cand / tr
                cand_probs = (basis.flat @ cand.T.reshape(-1)).real
                cand_ll = _log_likelihood(freqs, cand_probs)
                if cand_ll >= ll - 1e-15:
                    accepted = (cand, cand_probs, cand_ll)
                    break
            alpha = 1.0 if alpha is None else alpha * 0.5
            if alpha < 1e-6:
                break

        if accepted is None:
            converged = True  # no admissible improving step remains
            break
        rho, probs, new_ll = accepted
        gain = new_ll - ll
        ll = new_ll
        history.append(ll)
        if not np.isfinite(ll):
            best = EstimatorReport(
                state=rho, method=Method.MLE, iterations=iterations,
                residual=float(np.linalg.norm(freqs - probs)), projected=False,
                converged=False, history=history,
            )
            raise NoConvergenceError("likelihood became non-finite", best)
        if gain < tol:
            converged = True
            break

    return EstimatorReport(
        state=rho,
        method=Method.MLE,
        iterations=iterations,
        residual=float(np.linalg.norm(freqs - probs)),
        projected=False,
        converged=converged,
        history=history,
    )


def _hs_sq(A: np.ndarray, B: np.ndarray) -> float:
    delta = A - B
    return float(np.einsum("ij,ji->", delta, delta).real)


def optimal_depolarization(
    mle_states: list[np.ndarray], targets: list[np.ndarray]
) -> tuple[float, float]:
    """Best uniform admixture p for rho_p = p rho_mle + (1-p) I/d.

    The ensemble-averaged squared Hilbert-Schmidt distance to the targets is
    an exact parabola in p, q(p) = D0 + (D1 - D0 - D01) p + D01 p^2, built
    from three averaged distances (target vs I/d, target vs MLE, I/d vs
    MLE). Returns the clamped minimizer p* and q(p*).
    """
    if len(mle_states) == 0 or len(mle_states) != len(targets):
        raise ValueError("need equally many reconstructions and targets")
    d = targets[0].shape[0]
    mixed = np.eye(d) / d
    d0 = float(np.mean([_hs_sq(t, mixed) for t in targets]))
    d1 = float(np.mean([_hs_sq(t, m) for t, m in zip(targets, mle_states)]))
    d01 = float(np.mean([_hs_sq(mixed, m) for m in mle_states]))

    a = d01
    b = d1 - d0 - d01
    if a <= 1e-15:
        # all reconstructions at I/d: q is affine in p
        p_star = 1.0 if b < 0.0 else 0.0
    else:
        p_star = float(np.clip(-b / (2.0 * a), 0.0, 1.0))
    d_star_sq = d0 + b * p_star + a * p_star**2
    return p_star, float(d_star_sq)
