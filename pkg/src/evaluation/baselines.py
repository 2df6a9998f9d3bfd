"""Linear single-task baseline for regression benchmarks."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.linear_model import Ridge

from src.config.settings import EVAL_DEFAULTS
from src.errors import ContractError
from src.evaluation.metrics import masked_mse
from src.pipeline.dataset import TaskDataset

logger = logging.getLogger(__name__)


@dataclass
class RidgeBaseline:
    """One independently fitted ridge model per task (``None`` if untrainable)."""

    models: list[Optional[Ridge]]
    alpha: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions N×T; tasks without a model predict NaN."""
        columns = [
            np.full(X.shape[0], np.nan) if model is None else model.predict(X)
            for model in self.models
        ]
        return np.column_stack(columns)


def fit_ridge_baseline(
    train: TaskDataset, alpha: float = EVAL_DEFAULTS["ridge_alpha"]
) -> RidgeBaseline:
    """Fit ``Ridge(alpha)`` on each task's valid training rows."""
    if train.task_kind != "regression":
        raise ContractError("the ridge baseline only applies to regression tasks")
    models: list[Optional[Ridge]] = []
    for t in range(train.n_tasks):
        rows = np.flatnonzero(train.mask[:, t])
        if rows.size == 0:
            logger.warning("task %d has no training samples; no ridge model fitted", t)
            models.append(None)
            continue
        model = Ridge(alpha=alpha)
        model.fit(train.X[rows], train.targets[rows, t])
        models.append(model)
    return RidgeBaseline(models, alpha)


def ridge_metrics(
    train: TaskDataset, test: TaskDataset, alpha: float = EVAL_DEFAULTS["ridge_alpha"]
) -> np.ndarray:
    """Per-task test MSE of the ridge baseline; NaN where a task cannot be scored."""
    baseline = fit_ridge_baseline(train, alpha)
    predictions = baseline.predict(test.X)
    mask = test.mask & ~np.isnan(predictions)
    return masked_mse(np.nan_to_num(predictions), test.targets, mask)
