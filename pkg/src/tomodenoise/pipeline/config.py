"""Experiment configuration: dataclasses, profiles, and strict TOML parsing.

Dataclass defaults are the desk-scale profile (sized for a single CPU core);
the paper profile overrides them with the full-scale settings. A config file
overrides the profile, and CLI flags override the file. Unknown sections or
keys in a config file are errors, not warnings.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ..denoiser.training import TrainConfig


@dataclass
class GenerationConfig:
    """One dataset: ensemble, measurement, noise, and preprocessing."""

    ensemble: str = "hs"  # hs | haar
    dim: int = 9
    basis: str = "sqrt"  # sqrt | sic | pauli
    n_records: int = 2300
    n_trial: int = 1000
    noise: str = "direct"  # direct | indirect | none
    depolarization: float = 0.0
    bias_std: float = 0.0
    clamp_bias: bool = False
    estimator: str = "li"  # li | mle
    mle_tol: float = 1e-8
    mle_max_iter: int = 2000
    seed: int = 7
    stream: int = 1  # RNG stream id for per-record derivation
    out_name: str = "dataset"

    def __post_init__(self):
        if self.ensemble not in ("hs", "haar"):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.basis not in ("sqrt", "sic", "pauli"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.noise not in ("direct", "indirect", "none"):
            raise ValueError(f"unknown noise mode {self.noise!r}")
        if self.estimator not in ("li", "mle"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.basis in ("sic", "pauli"):
            L = self.dim.bit_length() - 1
            if 2**L != self.dim:
                raise ValueError(f"basis {self.basis!r} needs a power-of-two dimension")
        if self.basis == "pauli" and self.noise == "direct":
            raise ValueError("the mean-value basis has no direct (multinomial) sampling")
        if self.basis != "pauli" and self.noise == "indirect":
            raise ValueError("indirect (Gaussian) sampling needs mean-value semantics")
        if self.estimator == "mle" and self.basis == "pauli":
            raise ValueError("maximum likelihood needs a POVM basis")


@dataclass
class TrainJobConfig:
    """Train a model from a saved dataset (CLI `train`)."""

    dataset: str = "dataset"
    checkpoint: str = "model.ckpt"
    n_train: int = 2000
    n_val: int = 200
    batch: int = 500
    epochs: int = 300
    learning_rate: float = 1e-3
    architecture: str = "transformer"
    kernels: int = 32
    kernel_width: int = 3
    heads: int = 4
    head_dim: int | None = None
    reg_weight: float = 1.0
    parameter_budget: int | None = None
    seed: int = 7

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_train=self.n_train, n_val=self.n_val, batch=self.batch,
            epochs=self.epochs, learning_rate=self.learning_rate,
            seed=self.seed, architecture=self.architecture,
            kernels=self.kernels, kernel_width=self.kernel_width,
            heads=self.heads, head_dim=self.head_dim,
            reg_weight=self.reg_weight, parameter_budget=self.parameter_budget,
        )


@dataclass
class EvalJobConfig:
    """Evaluate a checkpoint on a saved dataset (CLI `eval`)."""

    dataset: str = "dataset"
    checkpoint: str = "model.ckpt"
    output: str = "eval"
    with_qfi: bool = False


@dataclass
class MixedBenchmarkConfig:
    """Mixed-state benchmark: HS ensemble, per-shot-count models."""

    dim: int = 9
    trial_grid: tuple = (1000,)
    n_train: int = 2000
    n_train_li: int | None = None  # defaults to n_train
    n_val: int = 200
    n_test: int = 100
    mle_tol: float = 1e-8
    mle_max_iter: int = 2000
    batch: int = 500
    epochs: int = 300
    learning_rate: float = 1e-3
    kernels: int = 32
    kernel_width: int = 3
    heads: int = 4
    head_dim: int | None = 20
    reg_weight: float = 1.0
    seed: int = 7

    def train_config(self, n_train: int) -> TrainConfig:
        return TrainConfig(
            n_train=n_train, n_val=self.n_val, batch=min(self.batch, n_train),
            epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed,
            kernels=self.kernels, kernel_width=self.kernel_width,
            heads=self.heads, head_dim=self.head_dim, reg_weight=self.reg_weight,
        )


@dataclass
class OatStudyConfig:
    """Out-of-distribution study: train on clean-noise Haar states, evaluate
    on the twisting trajectory under depolarization plus calibration bias."""

    length: int = 4
    n_times: int = 100
    depolarization: float = 0.3
    bias_std: float = 1e-4
    n_realizations: int = 2
    n_trial: int = 0  # 0 means calibrate the shot count
    target_fidelity: float = 0.85
    fidelity_window: float = 0.02
    n_calibration_states: int = 16
    calibration_reps: int = 2
    n_train: int = 1000
    n_val: int = 200
    batch: int = 256
    epochs: int = 80
    learning_rate: float = 1e-3
    kernels: int = 16
    kernel_width: int = 3
    heads: int = 4
    head_dim: int | None = 16
    reg_weight: float = 1.0
    seed: int = 7

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_train=self.n_train, n_val=self.n_val, batch=min(self.batch, self.n_train),
            epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed,
            kernels=self.kernels, kernel_width=self.kernel_width,
            heads=self.heads, head_dim=self.head_dim, reg_weight=self.reg_weight,
        )


@dataclass
class SamplingTableConfig:
    """Sampling-noise-only fidelity table (SIC-POVM, direct sampling)."""

    length: int = 4
    trial_grid: tuple = (1000000, 100000, 10000, 1000)
    n_test: int = 100
    include_nn: bool = True
    n_train: int = 2000
    n_val: int = 200
    batch: int = 256
    epochs: int = 200
    learning_rate: float = 1e-3
    kernels: int = 16
    kernel_width: int = 3
    heads: int = 4
    head_dim: int | None = 16
    reg_weight: float = 1.0
    seed: int = 7

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_train=self.n_train, n_val=self.n_val, batch=min(self.batch, self.n_train),
            epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed,
            kernels=self.kernels, kernel_width=self.kernel_width,
            heads=self.heads, head_dim=self.head_dim, reg_weight=self.reg_weight,
        )


@dataclass
class PstarConfig:
    """Optimal-depolarization analysis of MLE ensembles."""

    dim: int = 9
    trial_grid: tuple = (1000, 10000, 100000, 1000000)
    n_states: int = 200
    grid_points: int = 1000
    mle_tol: float = 1e-9
    mle_max_iter: int = 5000
    seed: int = 7


_SECTIONS = {
    "generation": GenerationConfig,
    "train": TrainJobConfig,
    "eval": EvalJobConfig,
    "mixed": MixedBenchmarkConfig,
    "oat": OatStudyConfig,
    "table": SamplingTableConfig,
    "pstar": PstarConfig,
}

# Full-scale settings; everything not listed keeps the desk default.
PAPER_OVERRIDES: dict = {
    "generation": {"n_records": 11500, "mle_tol": 1e-9, "mle_max_iter": 5000},
    "train": {"n_train": 10000, "n_val": 1500, "batch": 1500, "epochs": 500,
              "kernels": 64, "head_dim": None},
    "mixed": {"trial_grid": (1000, 10000, 100000, 1000000), "n_train": 2000,
              "n_train_li": 5000, "n_val": 1500, "n_test": 1000, "batch": 1500,
              "epochs": 500, "kernels": 64, "head_dim": None,
              "mle_tol": 1e-9, "mle_max_iter": 5000},
    "oat": {"n_train": 10000, "n_val": 1500, "batch": 1500, "epochs": 500,
            "kernels": 64, "head_dim": None},
    "table": {"n_test": 100, "n_train": 10000, "n_val": 1500, "batch": 1500,
              "epochs": 500, "kernels": 64, "head_dim": None},
    "pstar": {"n_states": 1000},
}

PROFILES = ("desk", "paper")


def _coerce(cls, merged: dict):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(merged) - set(fields))
    if unknown:
        raise ValueError(f"unknown config keys for [{cls.__name__}]: {', '.join(unknown)}")
    coerced = {}
    for key, val in merged.items():
        if isinstance(val, list):
            val = tuple(val)
        coerced[key] = val
    return cls(**coerced)


def load_config_file(path) -> dict:
    """Parse a TOML config file into per-section dicts, strictly."""
    raw = tomllib.loads(Path(path).read_text())
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ValueError(f"unknown config sections: {', '.join(unknown)}")
    for name, table in raw.items():
        if not isinstance(table, dict):
            raise ValueError(f"top-level key {name!r} must be a section")
    return raw


def resolve_section(
    section: str,
    profile: str = "desk",
    file_config: dict | None = None,
    seed: int | None = None,
):
    """Profile defaults, overridden by the config file, then the CLI seed."""
    if section not in _SECTIONS:
        raise ValueError(f"unknown config section {section!r}")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    merged: dict = {}
    if profile == "paper":
        merged.update(PAPER_OVERRIDES.get(section, {}))
    if file_config:
        merged.update(file_config.get(section, {}))
    if seed is not None and "seed" in {f.name for f in dataclasses.fields(_SECTIONS[section])}:
        merged["seed"] = seed
    return _coerce(_SECTIONS[section], merged)
