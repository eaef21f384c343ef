"""Density-matrix denoising network: Cholesky vectorization, a small
convolution + self-attention model with hand-written gradients, training,
and binary checkpoints."""

from .vectorize import pack_cholesky, unpack_cholesky
from .network import (
    Architecture,
    TransformerParams,
    CnnParams,
    NetworkParams,
    init_transformer,
    build_cnn_baseline,
    forward,
    loss,
    backward,
    parameter_count,
)
from .training import TrainConfig, TrainHistory, train, denoise, denoise_batch
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "pack_cholesky",
    "unpack_cholesky",
    "Architecture",
    "TransformerParams",
    "CnnParams",
    "NetworkParams",
    "init_transformer",
    "build_cnn_baseline",
    "forward",
    "loss",
    "backward",
    "parameter_count",
    "TrainConfig",
    "TrainHistory",
    "train",
    "denoise",
    "denoise_batch",
    "save_checkpoint",
    "load_checkpoint",
]
