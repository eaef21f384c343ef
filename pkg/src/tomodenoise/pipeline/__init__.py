"""Experiment orchestration: configs, datasets, benchmark drivers, CSV I/O."""

from .config import (
    EvalJobConfig,
    GenerationConfig,
    MixedBenchmarkConfig,
    OatStudyConfig,
    PstarConfig,
    SamplingTableConfig,
    TrainJobConfig,
    load_config_file,
    resolve_section,
)
from .datasets import (
    DatasetRecord,
    generate_dataset,
    generate_record,
    load_dataset,
    make_basis,
    regenerate_from_meta,
    save_dataset,
    training_arrays,
)
from .experiments import (
    calibrate_shot_count,
    run_architecture_benchmark,
    run_mixed_benchmark,
    run_oat_study,
    run_pstar_analysis,
    run_sampling_noise_table,
)
from .results import ExperimentResult, aggregate, rows_to_csv_text, save_result, write_csv

__all__ = [
    "DatasetRecord",
    "EvalJobConfig",
    "ExperimentResult",
    "GenerationConfig",
    "MixedBenchmarkConfig",
    "OatStudyConfig",
    "PstarConfig",
    "SamplingTableConfig",
    "TrainJobConfig",
    "aggregate",
    "calibrate_shot_count",
    "generate_dataset",
    "generate_record",
    "load_config_file",
    "load_dataset",
    "make_basis",
    "regenerate_from_meta",
    "resolve_section",
    "rows_to_csv_text",
    "run_architecture_benchmark",
    "run_mixed_benchmark",
    "run_oat_study",
    "run_pstar_analysis",
    "run_sampling_noise_table",
    "save_dataset",
    "save_result",
    "training_arrays",
    "write_csv",
]
