"""Configuration settings for the multi-task learning lab."""

import os
from pathlib import Path

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent.parent

# Training defaults (per-benchmark epoch counts are picked in EPOCHS_BY_BENCHMARK)
TRAIN_DEFAULTS = {
    "epochs": 100,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "seeds": [0, 1, 2],
    "s_max": 10.0,
}

EPOCHS_BY_BENCHMARK = {
    "mnist-imbalanced": 100,
    "synthetic-mtl": 200,
    "expression-csv": 200,
}

# Coefficients of the asymmetric transfer objective
REGULARIZER_DEFAULTS = {
    "alpha": 1e-3,
    "beta": 1e-2,
    "lambda_l1": 1e-4,
    "uncertainty_in_data_loss": True,
    "uncertainty_in_transfer": True,
}

EVAL_DEFAULTS = {
    "epsilon": 0.0,
    "ridge_alpha": 1e-2,
    "gradcheck_tolerance": 1e-4,
    "gradcheck_step": 1e-5,
}

DATA_DEFAULTS = {
    "imbalance_max": 200,
    "imbalance_ratio": 0.7,
    "num_digits": 10,
    "digit_side": 12,
    "digit_noise": 0.8,
    "digit_test_per_class": 100,
    "test_fraction": 0.25,
    "synthetic": {
        "task_count": 12,
        "feature_dim": 300,
        "latent_dim": 4,
        "samples": 600,
        "related_noise": 1.0,
        "outlier_noise": 1.5,
        "outlier_tasks": [9, 10, 11],
    },
}

MODEL_DEFAULTS = {
    "hidden_dims": [32],
}

# Per-benchmark replacements for TRAIN_DEFAULTS and MODEL_DEFAULTS keys
BENCHMARK_DEFAULTS = {
    "synthetic-mtl": {"hidden_dims": [6], "learning_rate": 5e-3},
}

# Runtime configuration (environment overrides)
RUNTIME_CONFIG = {
    "workers": int(os.getenv("UAMTFL_WORKERS", "1")),
    "log_level": os.getenv("UAMTFL_LOG_LEVEL", "WARNING"),
}

# Paths
OUTPUT_DIR = Path(os.getenv("UAMTFL_OUTPUT_DIR", str(PROJECT_ROOT / "outputs")))
