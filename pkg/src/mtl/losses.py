"""Data losses, uncertainty weighting and transfer regularizers.

Uncertainty is carried as a log-variance ``s_t = log σ_t²`` per task, so
``σ_t² = exp(s_t)`` is positive without any projection. Classification uses
the tractable surrogate ``exp(-s)·CE + s/2``; regression uses the Gaussian
negative log-likelihood ``exp(-s)·MSE/2 + s/2`` (``log σ = s/2``).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from src.autodiff.ops import cross_entropy, relu, softmax_rows
from src.autodiff.tensor import Tensor
from src.config.settings import REGULARIZER_DEFAULTS, TRAIN_DEFAULTS
from src.errors import ConfigError, ContractError, DataError, DimensionError, NumericError

logger = logging.getLogger(__name__)

S_MAX = TRAIN_DEFAULTS["s_max"]

Scalar = Union[Tensor, float]


@dataclass
class UncertaintyState:
    """Per-task learnable log-variances."""

    log_variance: Tensor
    trainable: bool = True
    s_max: float = S_MAX

    def __post_init__(self):
        if self.log_variance.ndim != 1 or self.log_variance.size == 0:
            raise ContractError(
                f"log_variance must be a non-empty vector, got shape "
                f"{list(self.log_variance.shape)}"
            )
        if np.any(np.abs(self.log_variance.data) > self.s_max):
            raise ContractError(f"log_variance outside [-{self.s_max}, {self.s_max}]")
        self.log_variance.requires_grad = self.trainable

    @classmethod
    def zeros(
        cls, task_count: int, trainable: bool = True, s_max: float = S_MAX
    ) -> "UncertaintyState":
        return cls(Tensor(np.zeros(task_count), name="log_variance"), trainable, s_max)

    @property
    def task_count(self) -> int:
        return self.log_variance.size

    def task(self, t: int) -> Tensor:
        """The scalar ``s_t`` as a node of the current graph."""
        return self.log_variance[t]

    def variances(self) -> np.ndarray:
        return np.exp(self.log_variance.data)

    def clamp(self) -> None:
        """Project every ``s_t`` back into ``[-s_max, s_max]`` in place."""
        np.clip(self.log_variance.data, -self.s_max, self.s_max, out=self.log_variance.data)


@dataclass(frozen=True)
class RegularizerConfig:
    """Coefficients of the transfer objective.

    The two flags select where U-AMTFL uses uncertainty: in the data-loss
    weighting, in the feedback sparsity weights, or both.
    """

    alpha: float = REGULARIZER_DEFAULTS["alpha"]
    beta: float = REGULARIZER_DEFAULTS["beta"]
    lambda_l1: float = REGULARIZER_DEFAULTS["lambda_l1"]
    uncertainty_in_data_loss: bool = REGULARIZER_DEFAULTS["uncertainty_in_data_loss"]
    uncertainty_in_transfer: bool = REGULARIZER_DEFAULTS["uncertainty_in_transfer"]

    def __post_init__(self):
        for field in ("alpha", "beta", "lambda_l1"):
            value = getattr(self, field)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"reg.{field}", f"must be finite and >= 0, got {value}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda_l1": self.lambda_l1,
            "uncertainty_in_data_loss": self.uncertainty_in_data_loss,
            "uncertainty_in_transfer": self.uncertainty_in_transfer,
        }


def _scalar(value: Scalar) -> Tensor:
    tensor = Tensor.lift(value)
    if tensor.size != 1:
        raise ContractError(f"s_t must be a scalar, got shape {list(tensor.shape)}")
    return tensor


def scaled_softmax_likelihood(
    f_t: Tensor, s_t: Scalar, task_index: Optional[int] = None
) -> Tensor:
    """Class probabilities ``softmax(f_t / σ_t²)`` for one task."""
    s = _scalar(s_t)
    try:
        return softmax_rows(f_t * (-s).exp())
    except NumericError as exc:
        raise NumericError(f"scaled logits are not finite ({exc})", task_index) from exc


def _check_labels(labels: np.ndarray, classes: int, task_index: Optional[int]) -> None:
    prefix = f"task {task_index}: " if task_index is not None else ""
    bad = np.flatnonzero((labels < 0) | (labels >= classes) | (labels != np.floor(labels)))
    if bad.size:
        first = int(bad[0])
        raise DataError(
            f"{prefix}label {labels[first]!r} at sample {first} outside [0, {classes})"
        )


def classification_data_loss(
    f_t: Tensor, y_t: np.ndarray, task_index: Optional[int] = None
) -> Tensor:
    """Mean cross-entropy on unscaled logits."""
    labels = np.asarray(y_t, dtype=np.float64)
    _check_labels(labels, f_t.shape[1], task_index)
    return cross_entropy(f_t, labels.astype(np.int64))


def classification_uncertainty_loss(
    f_t: Tensor, y_t: np.ndarray, s_t: Scalar, task_index: Optional[int] = None
) -> Tensor:
    """``exp(-s_t)·CE(f_t, y_t) + s_t/2``."""
    s = _scalar(s_t)
    ce = classification_data_loss(f_t, y_t, task_index)
    return (-s).exp() * ce + s * 0.5


def _masked_mse(f_t: Tensor, y_t: np.ndarray, mask: Optional[np.ndarray]) -> Optional[Tensor]:
    targets = np.asarray(y_t, dtype=np.float64)
    if f_t.shape != targets.shape:
        raise DimensionError(
            f"predictions {list(f_t.shape)} and targets {list(targets.shape)} differ"
        )
    valid = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(valid.sum())
    if count == 0:
        return None
    residual = (f_t - np.where(valid, targets, 0.0)) * valid.astype(np.float64)
    return residual.square().sum() / count


def regression_data_loss(
    f_t: Tensor, y_t: np.ndarray, mask: Optional[np.ndarray] = None
) -> Optional[Tensor]:
    """``MSE_masked / 2``; ``None`` when no sample is valid."""
    mse = _masked_mse(f_t, y_t, mask)
    return None if mse is None else mse * 0.5


def regression_uncertainty_loss(
    f_t: Tensor, y_t: np.ndarray, s_t: Scalar, mask: Optional[np.ndarray] = None
) -> Optional[Tensor]:
    """
    Gaussian negative log-likelihood with learned homoscedastic noise.

    Args:
        f_t: Predictions for one task, shape N
        y_t: Targets, shape N (masked cells may hold anything, NaN included)
        s_t: Log-variance of the task noise
        mask: Validity flags, shape N (all valid when omitted)

    Returns:
        ``(1/2)·exp(-s_t)·MSE_masked + s_t/2``, or ``None`` when the mask
        selects no sample and the task has to be skipped
    """
    mse = _masked_mse(f_t, y_t, mask)
    if mse is None:
        logger.debug("regression task skipped: empty mask")
        return None
    s = _scalar(s_t)
    return (-s).exp() * mse * 0.5 + s * 0.5


def l1_penalty(W: Tensor) -> Tensor:
    """Sum of absolute values; subgradient 0 at 0."""
    return W.abs().sum()


def asymmetric_feedback_regularizer(
    Z: Tensor,
    O: Tensor,
    A: Tensor,
    weights: Sequence[float],
    cfg: RegularizerConfig,
) -> Tensor:
    """
    Task-to-feature reconstruction plus weighted sparsity on feedback rows.

    Args:
        Z: Shared representation, N×H
        O: One output column per task, N×T
        A: Feedback matrix, T×H (row t carries task t's influence)
        weights: Per-task sparsity weights (constants), length T
        cfg: Regularizer coefficients

    Returns:
        ``beta·‖Z − relu(O·A)‖²_F/(N·H) + alpha·Σ_t weights[t]·‖a_t‖₁``
    """
    if Z.ndim != 2 or O.ndim != 2 or A.ndim != 2:
        raise DimensionError(
            f"regularizer expects matrices, got Z {list(Z.shape)}, O {list(O.shape)}, "
            f"A {list(A.shape)}"
        )
    n, h = Z.shape
    t = A.shape[0]
    if O.shape != (n, t) or A.shape[1] != h:
        raise DimensionError(
            f"regularizer shapes disagree: Z {list(Z.shape)}, O {list(O.shape)}, "
            f"A {list(A.shape)}"
        )
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (t,):
        raise DimensionError(f"weights length {w.size} does not match {t} tasks")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ContractError(f"transfer weights must be finite and >= 0, got {w.tolist()}")

    reconstruction = (Z - relu(O @ A)).square().sum() / (n * h)
    sparsity = (A.abs() * w[:, None]).sum()
    return reconstruction * cfg.beta + sparsity * cfg.alpha


def transfer_weights_from_loss(per_task_losses: Sequence[float]) -> np.ndarray:
    """Loss-guided weights: a task's own loss scales its feedback penalty."""
    losses = np.array(per_task_losses, dtype=np.float64)
    if not np.all(np.isfinite(losses)):
        raise ContractError(f"per-task losses must be finite, got {losses.tolist()}")
    negative = np.flatnonzero(losses < 0)
    if negative.size:
        raise ContractError(
            f"per-task loss of task {int(negative[0])} is negative ({losses[negative[0]]})"
        )
    return losses


def transfer_weights_from_uncertainty(u: UncertaintyState) -> np.ndarray:
    """Uncertainty-guided weights ``σ_t² = exp(s_t)``, detached from the graph."""
    return u.variances()
