"""Pytest configuration and fixtures."""

import json

import numpy as np
import pytest

from src.mtl.losses import RegularizerConfig
from src.mtl.models import ModelSpec
from src.pipeline.dataset import TaskDataset
from src.pipeline.synthetic import generate_synthetic_mtl
from src.training.trainer import TrainConfig


@pytest.fixture
def rng():
    """Deterministic generator for test data."""
    return np.random.default_rng(20240607)


@pytest.fixture
def regression_data():
    """Small two-task regression problem with one missing response."""
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 5))
    w = rng.normal(size=(5, 2))
    Y = X @ w + 0.1 * rng.normal(size=(40, 2))
    mask = np.ones_like(Y, dtype=bool)
    mask[3, 1] = False
    Y[3, 1] = np.nan
    return TaskDataset(X=X, targets=Y, mask=mask, split="train", task_kind="regression")


@pytest.fixture
def classification_data():
    """Small two-task binary classification problem."""
    rng = np.random.default_rng(11)
    X = rng.normal(size=(48, 4))
    targets = np.column_stack([(X[:, 0] > 0), (X[:, 1] + X[:, 2] > 0)]).astype(np.float64)
    return TaskDataset(
        X=X,
        targets=targets,
        mask=np.ones_like(targets, dtype=bool),
        split="train",
        task_kind="classification",
        num_classes=2,
    )


@pytest.fixture
def synthetic_small():
    """Reduced planted-outlier problem (6 tasks, 1 outlier)."""
    return generate_synthetic_mtl(
        task_count=6,
        feature_dim=12,
        latent_dim=4,
        samples=120,
        noise=[0.3] * 5 + [1.0],
        outlier_tasks=[5],
        seed=3,
    )


@pytest.fixture
def fast_train_config():
    """Few epochs, large step; enough to exercise the training loop."""
    return TrainConfig(epochs=3, batch_size=16, learning_rate=1e-2, seeds=(0, 1))


def make_spec(data: TaskDataset, variant: str, hidden=(6,), **kwargs) -> ModelSpec:
    return ModelSpec(
        input_dim=data.n_features,
        hidden_dims=hidden,
        task_count=data.n_tasks,
        task_kind=data.task_kind,
        variant=variant,
        num_classes=data.num_classes,
        reg=kwargs.pop("reg", RegularizerConfig()),
        **kwargs,
    )


@pytest.fixture
def spec_factory():
    """Build a ModelSpec matching a dataset."""
    return make_spec


@pytest.fixture
def synthetic_config(tmp_path):
    """Write a tiny synthetic-mtl experiment config and return its path."""

    def write(**overrides):
        config = {
            "benchmark": "synthetic-mtl",
            "variants": ["STL", "MTL", "AMTFL", "UAMTFL"],
            "train": {"epochs": 2, "batch_size": 32, "learning_rate": 0.01, "seeds": [0, 1, 2]},
            "model": {"hidden_dims": [8]},
            "data": {
                "task_count": 4,
                "feature_dim": 10,
                "latent_dim": 4,
                "samples": 80,
                "related_noise": 0.3,
                "outlier_noise": 1.0,
                "outlier_tasks": [3],
                "seed": 1,
                "test_fraction": 0.25,
            },
            "output_dir": str(tmp_path / "outputs"),
        }
        for key, value in overrides.items():
            config[key] = value
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(config))
        return path

    return write
