"""Transfer Bayesian optimization with neural mean/covariance GP surrogates."""

from ngpbo._core import (
    BoTrace,
    CandidatePool,
    ConfigError,
    Dataset,
    DatasetMeta,
    EpochRecord,
    MlpParams,
    NgpConfig,
    NgpModel,
    NumericError,
    ShapeError,
    Strategy,
    Task,
    TrainHistory,
    expected_improvement,
    generate_synthetic,
    gp_baseline_posterior,
    load_dataset,
    load_model,
    make_config,
    nn_baseline_fit,
    run_bo,
    save_dataset,
    save_model,
    split_tasks,
    strategy_gp,
    strategy_ngp,
    strategy_nn,
    strategy_nn_r,
    strategy_random,
    strategy_tgp,
    train,
    validation_score,
)

__all__ = [
    "BoTrace",
    "CandidatePool",
    "ConfigError",
    "Dataset",
    "DatasetMeta",
    "EpochRecord",
    "MlpParams",
    "NgpConfig",
    "NgpModel",
    "NumericError",
    "ShapeError",
    "Strategy",
    "Task",
    "TrainHistory",
    "expected_improvement",
    "generate_synthetic",
    "gp_baseline_posterior",
    "load_dataset",
    "load_model",
    "make_config",
    "nn_baseline_fit",
    "run_bo",
    "save_dataset",
    "save_model",
    "split_tasks",
    "strategy_gp",
    "strategy_ngp",
    "strategy_nn",
    "strategy_nn_r",
    "strategy_random",
    "strategy_tgp",
    "train",
    "validation_score",
]
