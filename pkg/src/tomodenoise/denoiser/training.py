"""Mini-batch training with adaptive moments, and denoising inference.

Training is deterministic given the config seed and thread count: parameter
initialization and epoch shuffles derive from fixed RNG streams, batches are
visited in slice order, and gradient accumulation follows sample-index
order inside each einsum/matmul reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..linalg import cholesky_factor, hermitianize
from ..seeding import STREAM_INIT, STREAM_SHUFFLE, make_rng
from .network import (
    Architecture,
    NetworkParams,
    backward_batch,
    build_cnn_baseline,
    copy_params,
    forward_batch,
    init_transformer,
    tree,
)
from .vectorize import pack_batch, pack_cholesky, unpack_batch, unpack_cholesky

CHOLESKY_EPS = 1e-5


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    Counts default to the full-scale settings (10000 train / 1500
    validation / batch 1500); reduced profiles override them. kernels,
    kernel_width, heads, and head_dim fix the transformer geometry;
    parameter_budget is only consulted by the CNN variants.
    """

    n_train: int = 10000
    n_val: int = 1500
    batch: int = 1500
    epochs: int = 500
    learning_rate: float = 1e-3
    seed: int = 0
    architecture: Architecture = Architecture.TRANSFORMER
    kernels: int = 64
    kernel_width: int = 3
    heads: int = 4
    head_dim: int | None = None
    reg_weight: float = 1.0
    parameter_budget: int | None = None

    def __post_init__(self):
        if isinstance(self.architecture, str):
            self.architecture = Architecture(self.architecture)
        for name in ("n_train", "n_val", "batch", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.batch > self.n_train:
            raise ValueError("batch size cannot exceed the training count")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2:
        ins, tgs = dataset
        return np.asarray(ins, dtype=float), np.asarray(tgs, dtype=float)
    pairs = list(dataset)
    if not pairs:
        raise ValueError("empty dataset")
    ins = np.stack([np.asarray(p[0], dtype=float) for p in pairs])
    tgs = np.stack([np.asarray(p[1], dtype=float) for p in pairs])
    return ins, tgs


def _build_params(cfg: TrainConfig, d: int, rng: np.random.Generator) -> NetworkParams:
    if cfg.architecture is Architecture.TRANSFORMER:
        return init_transformer(
            d, kernels=cfg.kernels, kernel_width=cfg.kernel_width,
            heads=cfg.heads, head_dim=cfg.head_dim, rng=rng,
        )
    if cfg.parameter_budget is None:
        raise ValueError("CNN variants need parameter_budget")
    return build_cnn_baseline(cfg.architecture, d, cfg.parameter_budget, rng=rng)


def _eval_loss(params: NetworkParams, ins: np.ndarray, tgs: np.ndarray,
               reg_weight: float, chunk: int) -> float:
    total = 0.0
    for start in range(0, len(ins), chunk):
        stop = min(start + chunk, len(ins))
        out, _ = forward_batch(params, ins[start:stop])
        diff = out - tgs[start:stop]
        total += float(np.sum(diff**2) + reg_weight * np.sum(out**2))
    return total / len(ins)


def train(dataset, cfg: TrainConfig) -> tuple[NetworkParams, TrainHistory]:
    """Train on the first n_train samples, validate on the next n_val.

    Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the batch-mean loss. The
    parameters returned are the snapshot with the best validation loss.
    """
    ins, tgs = _as_arrays(dataset)
    if len(ins) == 0:
        raise ValueError("empty dataset")
    if len(ins) < cfg.n_train + cfg.n_val:
        raise ValueError(
            f"dataset has {len(ins)} samples, need n_train + n_val = "
            f"{cfg.n_train + cfg.n_val}"
        )
    D = ins.shape[1]
    d = math.isqrt(D)
    if d * d != D:
        raise ValueError(f"sample length {D} is not a perfect square")

    train_in, train_tg = ins[: cfg.n_train], tgs[: cfg.n_train]
    val_in = ins[cfg.n_train : cfg.n_train + cfg.n_val]
    val_tg = tgs[cfg.n_train : cfg.n_train + cfg.n_val]

    params = _build_params(cfg, d, make_rng(cfg.seed, STREAM_INIT))
    shuffle_rng = make_rng(cfg.seed, STREAM_SHUFFLE)

    arrays = [arr for _, arr in tree(params)]
    m_state = [np.zeros_like(a) for a in arrays]
    v_state = [np.zeros_like(a) for a in arrays]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    history = TrainHistory()
    best_params = copy_params(params)

    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(cfg.n_train)
        epoch_loss = 0.0
        for start in range(0, cfg.n_train, cfg.batch):
            idx = perm[start : start + cfg.batch]
            _, cache = forward_batch(params, train_in[idx])
            batch_loss, grads = backward_batch(params, cache, train_tg[idx],
                                               cfg.reg_weight)
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for a, g, m, v in zip(arrays, grads, m_state, v_state):
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * g * g
                a -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + eps)
            epoch_loss += batch_loss * len(idx)
        history.train_loss.append(epoch_loss / cfg.n_train)

        val = _eval_loss(params, val_in, val_tg, cfg.reg_weight, cfg.batch)
        history.val_loss.append(val)
        if val < history.best_val:
            history.best_val = val
            history.best_epoch = epoch
            best_params = copy_params(params)

    return best_params, history


def denoise(params: NetworkParams, rho_in: np.ndarray) -> np.ndarray:
    """Map a reconstructed state through the network.

    rho -> C -> forward -> C_bar -> C_bar C_bar^H / trace. The output is a
    valid density matrix for any parameter values; a vanishing output trace
    falls back to the maximally mixed state.
    """
    d = params.dim
    if rho_in.shape != (d, d):
        raise ValueError(f"state shape {rho_in.shape} does not match model dim {d}")
    v = pack_cholesky(cholesky_factor(rho_in, CHOLESKY_EPS))
    out, _ = forward_batch(params, v[None, :])
    C = unpack_cholesky(out[0])
    M = C @ C.conj().T
    tr = np.trace(M).real
    if tr < 1e-12:
        return np.eye(d) / d
    return hermitianize(M / tr)


def denoise_batch(params: NetworkParams, states: np.ndarray) -> np.ndarray:
    """denoise() over a stack of states, vectorized."""
    n, d, _ = states.shape
    if d != params.dim:
        raise ValueError(f"state dim {d} does not match model dim {params.dim}")
    repaired = (hermitianize(states) + CHOLESKY_EPS * np.eye(d)) / (1.0 + CHOLESKY_EPS * d)
    C_in = np.linalg.cholesky(repaired)
    out, _ = forward_batch(params, pack_batch(C_in))
    C_out = unpack_batch(out)
    M = np.matmul(C_out, C_out.conj().swapaxes(-1, -2))
    traces = np.einsum("bii->b", M).real
    result = np.empty_like(M)
    for i in range(n):
        if traces[i] < 1e-12:
            result[i] = np.eye(d) / d
        else:
            result[i] = hermitianize(M[i] / traces[i])
    return result
