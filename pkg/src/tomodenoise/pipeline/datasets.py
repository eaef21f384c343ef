"""Dataset generation and the on-disk dataset format.

Every record is derived from (seed, stream, index) alone, so any record can
be regenerated without the rest of its dataset. Files come in pairs: a JSON
manifest and a little-endian float64 blob; complex matrices are stored as
interleaved (re, im) pairs in row-major order.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import measurement as ms
from ..denoiser.training import CHOLESKY_EPS
from ..denoiser.vectorize import pack_cholesky
from ..estimators import linear_inversion, mle_estimate
from ..linalg import cholesky_factor
from ..seeding import STREAM_BASIS, STREAM_BIAS, make_rng
from ..states import depolarize, haar_random_pure, hs_random_state
from .config import GenerationConfig

FORMAT_VERSION = 1


@dataclass
class DatasetRecord:
    """One simulated experiment: truth, data, and both vectorizations.

    The meta block alone regenerates the record: it carries the generation
    settings plus the record's own coordinates in the seed tree.
    """

    index: int
    target: np.ndarray
    frequencies: ms.FrequencyVector
    preprocessed: np.ndarray
    input_vec: np.ndarray
    target_vec: np.ndarray
    meta: dict


def record_meta(cfg: GenerationConfig, index: int) -> dict:
    meta = dataclasses.asdict(cfg)
    del meta["n_records"], meta["out_name"]
    meta["index"] = index
    return meta


def regenerate_from_meta(meta: dict) -> DatasetRecord:
    """Rebuild a record from its meta block alone."""
    fields = {k: v for k, v in meta.items() if k != "index"}
    cfg = GenerationConfig(n_records=meta["index"] + 1, **fields)
    basis = make_basis(cfg.basis, cfg.dim, cfg.seed)
    bias = make_bias(cfg, len(basis))
    return generate_record(cfg, meta["index"], basis, bias)


def make_basis(name: str, dim: int, seed: int) -> ms.MeasurementBasis:
    """Build the measurement basis named in a config.

    Only the square-root POVM consumes randomness; it draws from the basis
    stream of the experiment seed so the frame is fixed per experiment.
    """
    if name == "sqrt":
        return ms.sqrt_povm(dim, make_rng(seed, STREAM_BASIS))
    L = dim.bit_length() - 1
    if name == "sic":
        return ms.sic_povm(L)
    if name == "pauli":
        return ms.pauli_basis(L)
    raise ValueError(f"unknown basis {name!r}")


def make_bias(cfg: GenerationConfig, n_ops: int) -> np.ndarray | None:
    """Calibration bias vector, fixed for the whole experiment."""
    if cfg.bias_std <= 0.0:
        return None
    rng = make_rng(cfg.seed, STREAM_BIAS)
    return rng.normal(0.0, cfg.bias_std, n_ops)


def _draw_target(cfg: GenerationConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.ensemble == "hs":
        return hs_random_state(cfg.dim, rng)
    return haar_random_pure(cfg.dim, rng)


def simulate_frequencies(
    target: np.ndarray,
    basis: ms.MeasurementBasis,
    cfg: GenerationConfig,
    rng: np.random.Generator,
    bias: np.ndarray | None,
) -> ms.FrequencyVector:
    """Measured frequencies for one state under the configured noise."""
    measured = depolarize(target, cfg.depolarization) if cfg.depolarization > 0 else target
    p = ms.born_values(measured, basis)
    if cfg.noise == "direct":
        f = ms.sample_direct(p, cfg.n_trial, rng)
    elif cfg.noise == "indirect":
        f = ms.sample_indirect(p, cfg.n_trial, rng, identity_index=basis.identity_index)
    else:
        f = p
    if bias is not None:
        f = ms.apply_calibration_bias(f, bias, clamp=cfg.clamp_bias)
    return f


def preprocess(
    f: ms.FrequencyVector, basis: ms.MeasurementBasis, cfg: GenerationConfig
) -> np.ndarray:
    """Physical reconstruction used as the network input."""
    if cfg.estimator == "li":
        return linear_inversion(f, basis).state
    return mle_estimate(f, basis, tol=cfg.mle_tol, max_iter=cfg.mle_max_iter).state


def vectorize_state(rho: np.ndarray) -> np.ndarray:
    return pack_cholesky(cholesky_factor(rho, eps=CHOLESKY_EPS))


def generate_pair(
    cfg: GenerationConfig,
    index: int,
    basis: ms.MeasurementBasis,
    bias: np.ndarray | None,
) -> tuple[np.ndarray, ms.FrequencyVector]:
    """Target state and its measured frequencies, before preprocessing."""
    rng = make_rng(cfg.seed, cfg.stream, index)
    target = _draw_target(cfg, rng)
    return target, simulate_frequencies(target, basis, cfg, rng, bias)


def generate_record(
    cfg: GenerationConfig,
    index: int,
    basis: ms.MeasurementBasis,
    bias: np.ndarray | None,
) -> DatasetRecord:
    """Regenerate record `index` from its coordinates alone."""
    target, f = generate_pair(cfg, index, basis, bias)
    pre = preprocess(f, basis, cfg)
    return DatasetRecord(
        index=index,
        target=target,
        frequencies=f,
        preprocessed=pre,
        input_vec=vectorize_state(pre),
        target_vec=vectorize_state(target),
        meta=record_meta(cfg, index),
    )


def generate_dataset(
    cfg: GenerationConfig, basis: ms.MeasurementBasis | None = None
) -> list[DatasetRecord]:
    if basis is None:
        basis = make_basis(cfg.basis, cfg.dim, cfg.seed)
    bias = make_bias(cfg, len(basis))
    return [generate_record(cfg, i, basis, bias) for i in range(cfg.n_records)]


def training_arrays(records: list[DatasetRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Stack (inputs, targets) for the trainer."""
    x = np.stack([r.input_vec for r in records])
    t = np.stack([r.target_vec for r in records])
    return x, t


def _complex_to_flat(m: np.ndarray) -> np.ndarray:
    out = np.empty(m.size * 2, dtype="<f8")
    out[0::2] = m.real.reshape(-1)
    out[1::2] = m.imag.reshape(-1)
    return out


def _flat_to_complex(v: np.ndarray, d: int) -> np.ndarray:
    return (v[0::2] + 1j * v[1::2]).reshape(d, d)


def save_dataset(stem, records: list[DatasetRecord], cfg: GenerationConfig) -> None:
    """Write `<stem>.json` (manifest) and `<stem>.bin` (float64 blob)."""
    stem = Path(stem)
    d = cfg.dim
    n_ops = len(records[0].frequencies)
    vec_len = d * d
    fields = [
        ("target", 2 * d * d),
        ("frequencies", n_ops),
        ("preprocessed", 2 * d * d),
        ("input_vec", vec_len),
        ("target_vec", vec_len),
    ]
    per_record = sum(n for _, n in fields)
    blob = np.empty(len(records) * per_record, dtype="<f8")
    pos = 0
    for rec in records:
        for chunk in (
            _complex_to_flat(rec.target),
            rec.frequencies.values.astype("<f8"),
            _complex_to_flat(rec.preprocessed),
            rec.input_vec.astype("<f8"),
            rec.target_vec.astype("<f8"),
        ):
            blob[pos : pos + chunk.size] = chunk
            pos += chunk.size
    stem.with_suffix(".bin").write_bytes(blob.tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_records": len(records),
        "frequency_kind": records[0].frequencies.kind.value,
        "fields": [{"name": name, "floats": n} for name, n in fields],
        "floats_per_record": per_record,
        "byte_order": "little",
        "dtype": "float64",
        "complex_layout": "interleaved re,im row-major",
        "generation": dataclasses.asdict(cfg),
    }
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_dataset(stem) -> tuple[list[DatasetRecord], GenerationConfig]:
    stem = Path(stem)
    manifest = json.loads(stem.with_suffix(".json").read_text())
    if manifest["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {manifest['format_version']}")
    cfg = GenerationConfig(**manifest["generation"])
    d = cfg.dim
    kind = ms.FrequencyKind(manifest["frequency_kind"])
    per_record = manifest["floats_per_record"]
    blob = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    if blob.size != manifest["n_records"] * per_record:
        raise ValueError("dataset blob size does not match its manifest")
    sizes = {f["name"]: f["floats"] for f in manifest["fields"]}
    records = []
    for i in range(manifest["n_records"]):
        row = blob[i * per_record : (i + 1) * per_record]
        pos = 0
        parts = {}
        for name, n in sizes.items():
            parts[name] = row[pos : pos + n].copy()
            pos += n
        records.append(
            DatasetRecord(
                index=i,
                target=_flat_to_complex(parts["target"], d),
                frequencies=ms.FrequencyVector(values=parts["frequencies"], kind=kind),
                preprocessed=_flat_to_complex(parts["preprocessed"], d),
                input_vec=parts["input_vec"],
                target_vec=parts["target_vec"],
                meta=record_meta(cfg, i),
            )
        )
    return records, cfg
