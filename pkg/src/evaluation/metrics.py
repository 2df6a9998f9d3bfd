"""Per-task test metrics; lower is better for every metric."""

import logging

import numpy as np

from src.autodiff.tensor import Tensor
from src.errors import ContractError
from src.mtl.losses import scaled_softmax_likelihood
from src.mtl.models import ModelState, TaskKind, predict
from src.pipeline.dataset import TaskDataset

logger = logging.getLogger(__name__)

METRIC_BY_KIND = {
    "classification": "accuracy_error",
    "regression": "mse",
}


def metric_name(task_kind: str) -> str:
    return METRIC_BY_KIND[TaskKind(task_kind).value]


def masked_mse(predictions: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Column-wise MSE over valid cells; NaN for columns without any."""
    valid = np.asarray(mask, dtype=bool)
    counts = valid.sum(axis=0)
    residual = np.where(valid, np.asarray(predictions) - np.where(valid, targets, 0.0), 0.0)
    sums = (residual**2).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def per_task_metrics(m: ModelState, test: TaskDataset) -> np.ndarray:
    """
    Evaluate a trained model on a test partition.

    Classification tasks report accuracy error ``1 - accuracy`` from the
    argmax of the raw logits; regression tasks report masked MSE. Tasks
    without a valid test sample are NaN.

    Args:
        m: Trained model state
        test: Test partition

    Returns:
        Metric per task, length T
    """
    if test.n_tasks != m.spec.task_count:
        raise ContractError(
            f"test set has {test.n_tasks} tasks, model has {m.spec.task_count}"
        )
    if test.n_samples == 0:
        return np.full(test.n_tasks, np.nan)

    outputs = predict(m, test.X)
    if m.spec.task_kind is TaskKind.REGRESSION:
        predictions = np.column_stack(outputs)
        metrics = masked_mse(predictions, test.targets, test.mask)
    else:
        metrics = np.full(test.n_tasks, np.nan)
        for t, logits in enumerate(outputs):
            rows = np.flatnonzero(test.mask[:, t])
            if rows.size == 0:
                continue
            predicted = logits[rows].argmax(axis=1)
            if m.uncertainty is not None:
                s_t = float(m.uncertainty.log_variance.data[t])
                scaled = scaled_softmax_likelihood(Tensor(logits[rows]), s_t, t).numpy()
                if not np.array_equal(scaled.argmax(axis=1), predicted):
                    raise ContractError(f"task {t}: σ-scaling changed the predicted class")
            metrics[t] = float(np.mean(predicted != test.targets[rows, t].astype(np.int64)))

    absent = np.flatnonzero(np.isnan(metrics))
    if absent.size:
        logger.warning("no valid test samples for tasks %s", absent.tolist())
    return metrics
