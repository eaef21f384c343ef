"""The denoising network and its exact reverse-mode gradients.

Architecture (transformer variant): a width-w 1-D convolution lifts the
length-d^2 input vector to K channels; GELU; multi-head self-attention over
the K channel vectors (tokens of width d^2) with a residual connection; a
K-to-1 convolution merges channels; a dense d^2 x d^2 linear layer; finally
a split output activation, rectifier on the d diagonal slots and tanh on
the off-diagonal slots, so the output is again a packed Cholesky factor.

The CNN baselines replace everything between input and the split activation
with a plain stack of convolutions and GELUs, sized to a parameter budget.

All gradients are hand-derived; nothing here depends on an autodiff
framework. Internals are batch-first: vectors stack along axis 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

from ..errors import BudgetError


class Architecture(Enum):
    TRANSFORMER = "transformer"
    CNN2 = "cnn2"
    CNN4 = "cnn4"


@dataclass
class TransformerParams:
    dim: int  # d; model width is D = d^2
    heads: int
    head_dim: int
    conv_in_w: np.ndarray  # (K, 1, w)
    conv_in_b: np.ndarray  # (K,)
    wq: np.ndarray  # (h, D, head_dim)
    wk: np.ndarray  # (h, D, head_dim)
    wv: np.ndarray  # (h, D, head_dim)
    wo: np.ndarray  # (h, head_dim, D)
    conv_out_w: np.ndarray  # (1, K, w)
    conv_out_b: np.ndarray  # (1,)
    lin_w: np.ndarray  # (D, D)
    lin_b: np.ndarray  # (D,)

    @property
    def arch(self) -> Architecture:
        return Architecture.TRANSFORMER

    @property
    def kernels(self) -> int:
        return self.conv_in_w.shape[0]

    @property
    def kernel_width(self) -> int:
        return self.conv_in_w.shape[2]


@dataclass
class CnnParams:
    dim: int
    variant: Architecture  # CNN2 or CNN4
    weights: list  # [(c_out, c_in, w) arrays]
    biases: list  # [(c_out,) arrays]

    @property
    def arch(self) -> Architecture:
        return self.variant


NetworkParams = TransformerParams | CnnParams


def tree(params: NetworkParams) -> list[tuple[str, np.ndarray]]:
    """All trainable tensors in a fixed, documented order."""
    if isinstance(params, TransformerParams):
        return [
            ("conv_in_w", params.conv_in_w),
            ("conv_in_b", params.conv_in_b),
            ("wq", params.wq),
            ("wk", params.wk),
            ("wv", params.wv),
            ("wo", params.wo),
            ("conv_out_w", params.conv_out_w),
            ("conv_out_b", params.conv_out_b),
            ("lin_w", params.lin_w),
            ("lin_b", params.lin_b),
        ]
    out = []
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        out.append((f"conv{i}_w", W))
        out.append((f"conv{i}_b", b))
    return out


def parameter_count(params: NetworkParams) -> int:
    return sum(arr.size for _, arr in tree(params))


def copy_params(params: NetworkParams) -> NetworkParams:
    if isinstance(params, TransformerParams):
        return TransformerParams(
            dim=params.dim, heads=params.heads, head_dim=params.head_dim,
            **{name: arr.copy() for name, arr in tree(params)},
        )
    return CnnParams(
        dim=params.dim, variant=params.variant,
        weights=[W.copy() for W in params.weights],
        biases=[b.copy() for b in params.biases],
    )


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    scale = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-scale, scale, size=shape)


def init_transformer(
    d: int,
    kernels: int = 64,
    kernel_width: int = 3,
    heads: int = 4,
    head_dim: int | None = None,
    rng: np.random.Generator | None = None,
) -> TransformerParams:
    """Fan-in-scaled uniform initialization; biases start at zero.

    head_dim defaults to max(1, d^2 // heads); no divisibility constraint
    because per-head outputs are projected back to width d^2 and summed.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    D = d * d
    if head_dim is None:
        head_dim = max(1, D // heads)
    K, w, h = kernels, kernel_width, heads
    return TransformerParams(
        dim=d,
        heads=h,
        head_dim=head_dim,
        conv_in_w=_uniform(rng, (K, 1, w), w),
        conv_in_b=np.zeros(K),
        wq=_uniform(rng, (h, D, head_dim), D),
        wk=_uniform(rng, (h, D, head_dim), D),
        wv=_uniform(rng, (h, D, head_dim), D),
        wo=_uniform(rng, (h, head_dim, D), head_dim),
        conv_out_w=_uniform(rng, (1, K, w), K * w),
        conv_out_b=np.zeros(1),
        lin_w=_uniform(rng, (D, D), D),
        lin_b=np.zeros(D),
    )


def transformer_parameter_count(
    d: int, kernels: int = 64, kernel_width: int = 3, heads: int = 4,
    head_dim: int | None = None,
) -> int:
    """Closed-form count for the transformer geometry."""
    D = d * d
    if head_dim is None:
        head_dim = max(1, D // heads)
    K, w, h = kernels, kernel_width, heads
    return (K * w + K) + h * 4 * D * head_dim + (K * w + 1) + (D * D + D)


def build_cnn_baseline(
    variant: Architecture,
    d: int,
    parameter_budget: int,
    rng: np.random.Generator | None = None,
) -> CnnParams:
    """Conv-only baseline sized to a parameter budget (within 5%).

    Cnn2 is two convolutions (1 -> C -> 1) with a wide kernel spanning about
    half the sequence; Cnn4 is four width-3 convolutions (1 -> C -> C -> C
    -> 1). The channel count C is solved from the budget; if no integer C
    lands within 5% of the budget, BudgetError is raised.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    D = d * d

    if variant is Architecture.CNN2:
        w = max(3, (D // 2) | 1)  # odd, about half the sequence length
        count = lambda C: C * (2 * w + 1) + 1
        c_guess = max(1, round((parameter_budget - 1) / (2 * w + 1)))
        shapes = lambda C: [(C, 1, w), (1, C, w)]
    elif variant is Architecture.CNN4:
        w = 3
        count = lambda C: 2 * C * C * w + 2 * C * w + 3 * C + 1
        disc = 81 + 24 * (parameter_budget - 1)
        c_guess = max(1, round((-9 + math.sqrt(disc)) / 12))
        shapes = lambda C: [(C, 1, w), (C, C, w), (C, C, w), (1, C, w)]
    else:
        raise ValueError(f"not a CNN variant: {variant}")

    best = min(
        (c for c in (c_guess - 1, c_guess, c_guess + 1) if c >= 1),
        key=lambda c: abs(count(c) - parameter_budget),
    )
    if abs(count(best) - parameter_budget) > 0.05 * parameter_budget:
        raise BudgetError(
            f"{variant.value}: nearest achievable count {count(best)} misses "
            f"budget {parameter_budget} by more than 5%"
        )
    weights, biases = [], []
    for c_out, c_in, width in shapes(best):
        weights.append(_uniform(rng, (c_out, c_in, width), c_in * width))
        biases.append(np.zeros(c_out))
    return CnnParams(dim=d, variant=variant, weights=weights, biases=biases)


# ---------------------------------------------------------------------------
# primitive layers

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


# Kernels at least this wide go through the FFT path; taps beyond it cost
# more in memory traffic than the transforms do.
_FFT_MIN_WIDTH = 16


def _pow2_len(m: int) -> int:
    return 1 << (m - 1).bit_length()


def _conv_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray):
    """Same-length 1-D convolution. x: (B, c_in, D) -> (B, c_out, D)."""
    c_out, c_in, w = W.shape
    B, _, D = x.shape
    pad_l = (w - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad_l, w - 1 - pad_l)))
    if w >= _FFT_MIN_WIDTH:
        n = _pow2_len(xp.shape[2] + w - 1)
        xf = np.fft.rfft(xp, n=n, axis=2)
        wf = np.fft.rfft(W[:, :, ::-1], n=n, axis=2)
        # contract channels per frequency bin, then take the aligned window
        prod = np.matmul(xf.transpose(2, 0, 1), wf.transpose(2, 1, 0))
        conv = np.fft.irfft(prod.transpose(1, 2, 0), n=n, axis=2)
        out = conv[:, :, w - 1 : w - 1 + D] + b[None, :, None]
        return out, xp
    xt = np.ascontiguousarray(xp.transpose(1, 0, 2))
    acc = np.zeros((c_out, B * D))
    for j in range(w):
        seg = np.ascontiguousarray(xt[:, :, j : j + D]).reshape(c_in, B * D)
        # the tap slice is strided; matmul needs it contiguous to hit BLAS
        acc += np.ascontiguousarray(W[:, :, j]) @ seg
    out = acc.reshape(c_out, B, D).transpose(1, 0, 2) + b[None, :, None]
    return out, xp


def _conv_backward(W: np.ndarray, xp: np.ndarray, dout: np.ndarray):
    """Gradients of _conv_forward. Returns (dW, db, dx)."""
    c_out, c_in, w = W.shape
    B, _, D = dout.shape
    pad_l = (w - 1) // 2
    db = dout.sum(axis=(0, 2))
    if w >= _FFT_MIN_WIDTH:
        Dp = xp.shape[2]
        n = _pow2_len(Dp + w - 1)
        xf = np.fft.rfft(xp, n=n, axis=2)
        df = np.fft.rfft(dout, n=n, axis=2)
        # weight gradient is a cross-correlation of input with the upstream
        # gradient; lags 0..w-1 stay clear of circular wraparound since n >= Dp
        cw = np.matmul(df.conj().transpose(2, 1, 0), xf.transpose(2, 0, 1))
        dW = np.fft.irfft(cw.transpose(1, 2, 0), n=n, axis=2)[:, :, :w]
        # input gradient is the full convolution of the upstream gradient
        # with the unreversed kernel
        wf = np.fft.rfft(W, n=n, axis=2)
        cx = np.matmul(df.transpose(2, 0, 1), wf.transpose(2, 0, 1))
        dxp = np.fft.irfft(cx.transpose(1, 2, 0), n=n, axis=2)[:, :, :Dp]
        return dW, db, dxp[:, :, pad_l : pad_l + D]
    xt = np.ascontiguousarray(xp.transpose(1, 0, 2))
    dt = np.ascontiguousarray(dout.transpose(1, 0, 2)).reshape(c_out, B * D)
    dW = np.empty_like(W)
    dxp_t = np.zeros_like(xt)
    for j in range(w):
        seg = np.ascontiguousarray(xt[:, :, j : j + D]).reshape(c_in, B * D)
        dW[:, :, j] = dt @ seg.T
        Wj = np.ascontiguousarray(W[:, :, j])
        dxp_t[:, :, j : j + D] += (Wj.T @ dt).reshape(c_in, B, D)
    dx = dxp_t[:, :, pad_l : pad_l + D].transpose(1, 0, 2)
    return dW, db, dx


def _softmax(S: np.ndarray) -> np.ndarray:
    shifted = S - S.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_activation(z: np.ndarray, d: int):
    """Rectifier on the d diagonal slots, tanh on the rest."""
    out = np.empty_like(z)
    out[:, :d] = np.maximum(z[:, :d], 0.0)
    out[:, d:] = np.tanh(z[:, d:])
    return out


def _split_activation_grad(z: np.ndarray, out: np.ndarray, d: int) -> np.ndarray:
    g = np.empty_like(z)
    g[:, :d] = (z[:, :d] > 0.0).astype(float)
    g[:, d:] = 1.0 - out[:, d:] ** 2
    return g


# ---------------------------------------------------------------------------
# forward / backward

def forward_batch(params: NetworkParams, V: np.ndarray):
    """Forward pass on a (B, d^2) stack; returns (output, cache)."""
    if isinstance(params, TransformerParams):
        return _transformer_forward(params, V)
    return _cnn_forward(params, V)


def _transformer_forward(p: TransformerParams, V: np.ndarray):
    d = p.dim
    D = d * d
    if V.ndim != 2 or V.shape[1] != D:
        raise ValueError(f"input shape {V.shape} does not match model width {D}")
    x1, xp0 = _conv_forward(p.conv_in_w, p.conv_in_b, V[:, None, :])
    a1 = _gelu(x1)  # (B, K, D): K tokens of width D

    scale = 1.0 / math.sqrt(p.head_dim)
    Qh = np.matmul(a1[:, None], p.wq[None])  # (B, h, K, head_dim)
    Kh = np.matmul(a1[:, None], p.wk[None])
    Vh = np.matmul(a1[:, None], p.wv[None])
    S = np.matmul(Qh, Kh.swapaxes(-1, -2)) * scale  # (B, h, K, K)
    P = _softmax(S)
    Hh = np.matmul(P, Vh)  # (B, h, K, head_dim)
    attn = np.matmul(Hh, p.wo[None]).sum(axis=1)  # (B, K, D)
    x2 = a1 + attn

    y3_c, xp2 = _conv_forward(p.conv_out_w, p.conv_out_b, x2)
    y3 = y3_c[:, 0, :]  # (B, D)
    z = y3 @ p.lin_w.T + p.lin_b
    out = _split_activation(z, d)
    cache = dict(V=V, xp0=xp0, x1=x1, a1=a1, Qh=Qh, Kh=Kh, Vh=Vh, P=P, Hh=Hh,
                 xp2=xp2, y3=y3, z=z, out=out, scale=scale)
    return out, cache


def _cnn_forward(p: CnnParams, V: np.ndarray):
    d = p.dim
    if V.ndim != 2 or V.shape[1] != d * d:
        raise ValueError(f"input shape {V.shape} does not match model width {d * d}")
    x = V[:, None, :]
    pads, pres = [], []
    n_layers = len(p.weights)
    for i, (W, b) in enumerate(zip(p.weights, p.biases)):
        pre, xp = _conv_forward(W, b, x)
        pads.append(xp)
        pres.append(pre)
        x = _gelu(pre) if i < n_layers - 1 else pre
    z = x[:, 0, :]
    out = _split_activation(z, d)
    cache = dict(pads=pads, pres=pres, z=z, out=out)
    return out, cache


def backward_batch(
    params: NetworkParams,
    cache: dict,
    targets: np.ndarray,
    reg_weight: float = 1.0,
):
    """Batch-mean loss and its exact gradients.

    loss_b = ||target_b - out_b||^2 + reg_weight ||out_b||^2, averaged over
    the batch. Returns (loss, list of gradient arrays in tree order).
    """
    out = cache["out"]
    B = out.shape[0]
    diff = out - targets
    loss_val = float(np.mean(np.sum(diff**2, axis=1) + reg_weight * np.sum(out**2, axis=1)))
    dout = (2.0 * diff + 2.0 * reg_weight * out) / B
    if isinstance(params, TransformerParams):
        grads = _transformer_backward(params, cache, dout)
    else:
        grads = _cnn_backward(params, cache, dout)
    return loss_val, grads


def _transformer_backward(p: TransformerParams, cache: dict, dout: np.ndarray):
    d = p.dim
    h = p.heads
    dz = dout * _split_activation_grad(cache["z"], cache["out"], d)

    y3 = cache["y3"]
    d_lin_w = dz.T @ y3
    d_lin_b = dz.sum(axis=0)
    dy3 = dz @ p.lin_w

    d_conv_out_w, d_conv_out_b, dx2 = _conv_backward(
        p.conv_out_w, cache["xp2"], dy3[:, None, :]
    )

    # attention backward; residual feeds dx2 straight into da1
    a1, Qh, Kh, Vh, P, Hh = (cache[k] for k in ("a1", "Qh", "Kh", "Vh", "P", "Hh"))
    scale = cache["scale"]
    B, K, D = a1.shape
    Dh = p.head_dim

    dHh = np.matmul(dx2[:, None], p.wo.swapaxes(-1, -2)[None])  # (B, h, K, Dh)
    Hh_flat = Hh.transpose(1, 3, 0, 2).reshape(h * Dh, B * K)
    d_wo = (Hh_flat @ dx2.reshape(B * K, D)).reshape(h, Dh, D)

    dP = np.matmul(dHh, Vh.swapaxes(-1, -2))
    dVh = np.matmul(P.swapaxes(-1, -2), dHh)
    dS = P * (dP - (dP * P).sum(axis=-1, keepdims=True))
    dS *= scale
    dQh = np.matmul(dS, Kh)
    dKh = np.matmul(dS.swapaxes(-1, -2), Qh)

    a1_flat = a1.reshape(B * K, D)
    d_wq = np.empty_like(p.wq)
    d_wk = np.empty_like(p.wk)
    d_wv = np.empty_like(p.wv)
    for m in range(h):
        d_wq[m] = a1_flat.T @ dQh[:, m].reshape(B * K, Dh)
        d_wk[m] = a1_flat.T @ dKh[:, m].reshape(B * K, Dh)
        d_wv[m] = a1_flat.T @ dVh[:, m].reshape(B * K, Dh)

    da1 = dx2.copy()  # residual path
    da1 += np.matmul(dQh, p.wq.swapaxes(-1, -2)[None]).sum(axis=1)
    da1 += np.matmul(dKh, p.wk.swapaxes(-1, -2)[None]).sum(axis=1)
    da1 += np.matmul(dVh, p.wv.swapaxes(-1, -2)[None]).sum(axis=1)

    dx1 = da1 * _gelu_grad(cache["x1"])
    d_conv_in_w, d_conv_in_b, _ = _conv_backward(p.conv_in_w, cache["xp0"], dx1)

    return [
        d_conv_in_w, d_conv_in_b, d_wq, d_wk, d_wv, d_wo,
        d_conv_out_w, d_conv_out_b, d_lin_w, d_lin_b,
    ]


def _cnn_backward(p: CnnParams, cache: dict, dout: np.ndarray):
    d = p.dim
    dz = dout * _split_activation_grad(cache["z"], cache["out"], d)
    dx = dz[:, None, :]
    n_layers = len(p.weights)
    grads: list = [None] * (2 * n_layers)
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            dx = dx * _gelu_grad(cache["pres"][i])
        dW, db, dx = _conv_backward(p.weights[i], cache["pads"][i], dx)
        grads[2 * i] = dW
        grads[2 * i + 1] = db
    return grads


# ---------------------------------------------------------------------------
# single-sample interface

def forward(params: NetworkParams, v: np.ndarray) -> np.ndarray:
    """Network output for one packed Cholesky vector."""
    out, _ = forward_batch(params, np.asarray(v, dtype=float)[None, :])
    return out[0]


def loss(
    params: NetworkParams,
    v_in: np.ndarray,
    v_target: np.ndarray,
    reg_weight: float = 1.0,
) -> float:
    """||v_target - forward(v_in)||^2 + reg_weight ||forward(v_in)||^2.

    The regularization term equals Tr[C C^H] of the output factor, pulling
    reconstructions toward small norm exactly as the matrix-side expression.
    """
    v_in = np.asarray(v_in, dtype=float)
    v_target = np.asarray(v_target, dtype=float)
    if v_in.shape != v_target.shape:
        raise ValueError(f"shape mismatch: {v_in.shape} vs {v_target.shape}")
    out, _ = forward_batch(params, v_in[None, :])
    diff = v_target - out[0]
    return float(diff @ diff + reg_weight * (out[0] @ out[0]))


def backward(
    params: NetworkParams,
    v_in: np.ndarray,
    v_target: np.ndarray,
    reg_weight: float = 1.0,
):
    """Exact gradient of loss() for one sample, in tree order."""
    v_in = np.asarray(v_in, dtype=float)
    v_target = np.asarray(v_target, dtype=float)
    if v_in.shape != v_target.shape:
        raise ValueError(f"shape mismatch: {v_in.shape} vs {v_target.shape}")
    _, cache = forward_batch(params, v_in[None, :])
    _, grads = backward_batch(params, cache, v_target[None, :], reg_weight)
    return grads
