"""Command-line interface for dataset generation, training, and benchmarks.

Thread limits must be pinned before numpy loads, so everything heavy is
imported inside main() after the thread flag is applied. All subcommands
share the same global flags; --seed overrides the seed from profile and
config file alike.
"""

from __future__ import annotations

import argparse
import os
from pathlib import Path

_COMMANDS = (
    ("gen-data", "generate a dataset and write its manifest + binary blob"),
    ("train", "train a denoiser from a saved dataset and write a checkpoint"),
    ("eval", "evaluate a checkpoint on a saved dataset"),
    ("benchmark-mixed", "mixed-state benchmark: LI/MLE with and without denoising"),
    ("benchmark-oat", "out-of-distribution study along the twisting trajectory"),
    ("table-sampling", "sampling-noise-only fidelity table"),
    ("pstar", "optimal depolarization analysis of MLE ensembles"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomodenoise",
        description="simulated tomography benchmarks with a learned denoiser",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML config file")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="BLAS thread count")
    common.add_argument(
        "--profile", choices=("desk", "paper"), default="desk",
        help="desk: reduced scale; paper: full scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS:
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _set_thread_count(n: int) -> None:
    for var in (
        "OPENBLAS_NUM_THREADS",
        "OMP_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ[var] = str(n)


def _resolve_path(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_thread_count(args.threads)

    from .config import load_config_file, resolve_section

    file_cfg = load_config_file(args.config) if args.config else {}
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "gen-data":
        from .datasets import generate_dataset, save_dataset

        cfg = resolve_section("generation", args.profile, file_cfg, args.seed)
        records = generate_dataset(cfg)
        stem = out / cfg.out_name
        save_dataset(stem, records, cfg)
        print(f"wrote {len(records)} records: {stem}.json / {stem}.bin")
        return 0

    if args.command == "train":
        from ..denoiser.checkpoint import save_checkpoint
        from ..denoiser.training import train
        from .datasets import load_dataset, training_arrays

        cfg = resolve_section("train", args.profile, file_cfg, args.seed)
        records, gen_cfg = load_dataset(_resolve_path(out, cfg.dataset))
        params, history = train(training_arrays(records), cfg.train_config())
        ckpt = _resolve_path(out, cfg.checkpoint)
        save_checkpoint(
            ckpt,
            params,
            manifest_extra={
                "dataset": cfg.dataset,
                "estimator": gen_cfg.estimator,
                "n_trial": gen_cfg.n_trial,
                "best_epoch": history.best_epoch,
                "best_val": history.best_val,
            },
        )
        print(
            f"trained {cfg.epochs} epochs; best validation loss "
            f"{history.best_val:.6g} at epoch {history.best_epoch}; wrote {ckpt}"
        )
        return 0

    if args.command == "eval":
        from ..denoiser.checkpoint import load_checkpoint
        from ..denoiser.training import denoise_batch
        from ..metrics import hs_distance_sq, optimal_axis_qfi, sqrt_fidelity
        from .datasets import load_dataset
        from .results import (
            ExperimentResult,
            aggregate,
            aggregate_columns,
            save_result,
        )
        import numpy as np

        cfg = resolve_section("eval", args.profile, file_cfg, args.seed)
        records, gen_cfg = load_dataset(_resolve_path(out, cfg.dataset))
        params = load_checkpoint(_resolve_path(out, cfg.checkpoint))
        pres = np.stack([r.preprocessed for r in records])
        dens = denoise_batch(params, pres)
        label = gen_cfg.estimator.upper()
        with_qfi = cfg.with_qfi and 2 ** (gen_cfg.dim.bit_length() - 1) == gen_cfg.dim
        columns = ["method", "state", "fidelity", "d2"]
        if with_qfi:
            columns += ["qfi", "qfi_normalized", "depth"]
        rows = []
        for i, rec in enumerate(records):
            for method, state in ((label, pres[i]), (f"{label}-NN", dens[i])):
                row = {
                    "method": method,
                    "state": i,
                    "fidelity": sqrt_fidelity(state, rec.target),
                    "d2": hs_distance_sq(state, rec.target),
                }
                if with_qfi:
                    report = optimal_axis_qfi(state)
                    row.update(
                        qfi=report.qfi,
                        qfi_normalized=report.normalized,
                        depth=report.depth,
                    )
                rows.append(row)
        result = ExperimentResult(
            name=cfg.output,
            columns=tuple(columns),
            rows=rows,
            aggregate_columns=aggregate_columns(("method",), ("fidelity", "d2")),
            aggregates=aggregate(rows, ("method",), ("fidelity", "d2")),
        )
        save_result(result, out)
        for agg in result.aggregates:
            print(
                f"{agg['method']}: fidelity {agg['fidelity_mean']:.4f} "
                f"+- {agg['fidelity_std']:.4f}, D2 {agg['d2_mean']:.3e}"
            )
        return 0

    # the four benchmark drivers share the reporting pattern
    from . import experiments

    driver, section = {
        "benchmark-mixed": (experiments.run_mixed_benchmark, "mixed"),
        "benchmark-oat": (experiments.run_oat_study, "oat"),
        "table-sampling": (experiments.run_sampling_noise_table, "table"),
        "pstar": (experiments.run_pstar_analysis, "pstar"),
    }[args.command]
    cfg = resolve_section(section, args.profile, file_cfg, args.seed)
    result = driver(cfg, out_dir=out, progress=print)
    if result.aggregates:
        keys = [c for c in result.aggregate_columns if not c.endswith(("_mean", "_std"))]
        for agg in result.aggregates:
            tag = " ".join(f"{k}={agg[k]}" for k in keys)
            metrics = ", ".join(
                f"{c[:-5]} {agg[c]:.4f}" for c in result.aggregate_columns
                if c.endswith("_mean")
            )
            print(f"{tag}: {metrics}")
    else:
        for row in result.rows:
            print(", ".join(f"{k}={v}" for k, v in row.items()))
    print(f"results written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
