"""Deterministic minibatch training."""

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from src.autodiff.tensor import Graph, Tensor
from src.config.settings import TRAIN_DEFAULTS
from src.errors import ConfigError, ContractError, DimensionError, NumericError, TrainingError
from src.mtl.checkpoint import encode_tensors
from src.mtl.losses import RegularizerConfig, UncertaintyState, regression_uncertainty_loss
from src.mtl.models import ModelSpec, ModelState, build, total_loss
from src.pipeline.dataset import TaskDataset
from src.training.optimizers import Adam, make_optimizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule and run-set settings."""

    epochs: int = TRAIN_DEFAULTS["epochs"]
    batch_size: int = TRAIN_DEFAULTS["batch_size"]
    learning_rate: float = TRAIN_DEFAULTS["learning_rate"]
    optimizer: str = TRAIN_DEFAULTS["optimizer"]
    beta1: float = TRAIN_DEFAULTS["beta1"]
    beta2: float = TRAIN_DEFAULTS["beta2"]
    eps: float = TRAIN_DEFAULTS["eps"]
    seeds: tuple[int, ...] = tuple(TRAIN_DEFAULTS["seeds"])
    s_max: float = TRAIN_DEFAULTS["s_max"]
    reg: Optional[RegularizerConfig] = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.epochs < 1:
            raise ConfigError("epochs", f"must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigError("learning_rate", f"must be finite and >= 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer", f"unknown optimizer {self.optimizer!r}")
        if not self.seeds:
            raise ConfigError("seeds", "seed list must not be empty")
        if not self.s_max > 0:
            raise ConfigError("s_max", f"must be > 0, got {self.s_max}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seeds": list(self.seeds),
            "s_max": self.s_max,
            "reg": None if self.reg is None else self.reg.to_dict(),
        }


def _nan_to_none(values: Sequence[float]) -> list[Optional[float]]:
    return [None if np.isnan(v) else float(v) for v in values]


def _none_to_nan(values: Sequence[Optional[float]]) -> list[float]:
    return [float("nan") if v is None else float(v) for v in values]


@dataclass
class RunHistory:
    """Per-epoch record of one training run."""

    seed: int
    variant: str
    fitter: str = "network"
    epoch_loss: list[float] = field(default_factory=list)
    task_losses: list[list[float]] = field(default_factory=list)
    log_variance: list[list[float]] = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    @property
    def epochs(self) -> int:
        return len(self.epoch_loss)

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        """JSON-ready form; timing is excluded unless asked for so reruns match byte for byte."""
        record: dict[str, Any] = {
            "seed": self.seed,
            "variant": self.variant,
            "fitter": self.fitter,
            "epoch_loss": [float(v) for v in self.epoch_loss],
            "task_losses": [_nan_to_none(row) for row in self.task_losses],
            "log_variance": [[float(v) for v in row] for row in self.log_variance],
        }
        if include_timing:
            record["wall_clock_seconds"] = self.wall_clock_seconds
        return record

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> "RunHistory":
        return cls(
            seed=int(record["seed"]),
            variant=record["variant"],
            fitter=record.get("fitter", "network"),
            epoch_loss=[float(v) for v in record["epoch_loss"]],
            task_losses=[_none_to_nan(row) for row in record["task_losses"]],
            log_variance=[[float(v) for v in row] for row in record["log_variance"]],
            wall_clock_seconds=float(record.get("wall_clock_seconds", 0.0)),
        )


@dataclass
class TrainResult:
    state: ModelState
    history: RunHistory


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Sample order for one epoch, from a stream owned by ``(seed, epoch)``."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def _column_means(rows: list[np.ndarray]) -> np.ndarray:
    stacked = np.vstack(rows)
    valid = ~np.isnan(stacked)
    counts = valid.sum(axis=0)
    sums = np.where(valid, stacked, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def _abort(
    reason: str,
    state: ModelState,
    snapshot: dict[str, np.ndarray],
    epoch: int,
    step: int,
    checkpoint_dir: Optional[Path],
) -> TrainingError:
    path = None
    if checkpoint_dir is not None:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        path = checkpoint_dir / "last_good.ckpt"
        path.write_bytes(encode_tensors(snapshot))
    logger.error("training aborted at epoch %d, step %d: %s", epoch, step, reason)
    return TrainingError(reason, epoch, step, path)


def train(
    spec: ModelSpec,
    data: TaskDataset,
    cfg: TrainConfig,
    seed: int,
    checkpoint_dir: Optional[Path] = None,
) -> TrainResult:
    """
    Train one model on ``data`` with shuffled minibatches.

    Args:
        spec: Model specification; its seed is replaced by ``seed``
        data: Training partition
        cfg: Optimizer and schedule settings
        seed: Seed for initialization and shuffling
        checkpoint_dir: Where the last good checkpoint goes if training aborts

    Returns:
        TrainResult with the final state and the full history
    """
    spec = replace(spec, seed=seed, s_max=cfg.s_max)
    if cfg.reg is not None:
        spec = replace(spec, reg=cfg.reg)
    if data.split == "test":
        raise ContractError("refusing to train on a test partition")
    if data.n_features != spec.input_dim or data.n_tasks != spec.task_count:
        raise DimensionError(
            f"data has {data.n_features} features × {data.n_tasks} tasks, model expects "
            f"{spec.input_dim} × {spec.task_count}"
        )

    state = build(spec)
    optimizer = make_optimizer(
        cfg.optimizer, state.parameters, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps
    )
    history = RunHistory(seed=seed, variant=spec.variant.value)
    snapshot = state.graph.snapshot()
    started = time.perf_counter()
    logger.info("training %s seed=%d for %d epochs", spec.variant.value, seed, cfg.epochs)

    step = 0
    for epoch in range(cfg.epochs):
        order = epoch_order(seed, epoch, data.n_samples)
        totals: list[float] = []
        task_rows: list[np.ndarray] = []
        for offset in range(0, data.n_samples, cfg.batch_size):
            batch = data.batch(order[offset : offset + cfg.batch_size])
            if not batch.mask.any():
                continue
            try:
                breakdown = total_loss(state, batch)
                state.graph.backward(breakdown.total)
            except NumericError as exc:
                raise _abort(f"non-finite loss ({exc})", state, snapshot, epoch, step, checkpoint_dir) from exc
            optimizer.step()
            if state.uncertainty is not None:
                state.uncertainty.clamp()
            if not all(np.all(np.isfinite(p.data)) for p in state.parameters.values()):
                raise _abort("non-finite parameters", state, snapshot, epoch, step, checkpoint_dir)
            step += 1
            totals.append(breakdown.total.item())
            task_rows.append(breakdown.per_task)

        snapshot = state.graph.snapshot()
        history.epoch_loss.append(float(np.mean(totals)) if totals else float("nan"))
        history.task_losses.append(
            _column_means(task_rows).tolist() if task_rows else [float("nan")] * spec.task_count
        )
        if state.uncertainty is not None:
            history.log_variance.append(state.uncertainty.log_variance.data.tolist())
        logger.debug("epoch %d: loss %.6f", epoch, history.epoch_loss[-1])

    history.wall_clock_seconds = time.perf_counter() - started
    state.graph.nodes = []
    return TrainResult(state, history)


def optimize(
    graph: Graph,
    loss_fn: Callable[[], Tensor],
    optimizer,
    steps: int,
    after_step: Optional[Callable[[], None]] = None,
) -> list[float]:
    """Run ``steps`` full-batch updates of ``graph``'s parameters; returns the loss trace."""
    trace = []
    for _ in range(steps):
        loss = loss_fn()
        graph.backward(loss)
        optimizer.step()
        if after_step is not None:
            after_step()
        trace.append(loss.item())
    graph.nodes = []
    return trace


def calibrate_uncertainty(
    predictions: np.ndarray,
    targets: np.ndarray,
    mask: Optional[np.ndarray] = None,
    steps: int = 500,
    lr: float = 0.05,
    s_max: float = TRAIN_DEFAULTS["s_max"],
) -> UncertaintyState:
    """
    Fit only the log-variances against frozen regression predictions.

    At the optimum ``exp(s_t)`` equals task t's masked residual MSE.

    Args:
        predictions: Frozen predictions, N×T
        targets: Targets, N×T
        mask: Validity flags, N×T
        steps: Adam steps
        lr: Adam step size
        s_max: Clamp bound on every ``s_t``

    Returns:
        The fitted UncertaintyState
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    mask = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if predictions.shape != targets.shape or mask.shape != targets.shape:
        raise DimensionError(
            f"predictions {list(predictions.shape)}, targets {list(targets.shape)} and "
            f"mask {list(mask.shape)} must agree"
        )
    tasks = targets.shape[1]
    u = UncertaintyState.zeros(tasks, trainable=True, s_max=s_max)
    graph = Graph({"uncertainty.s": u.log_variance})
    frozen = [Tensor(predictions[:, t]) for t in range(tasks)]

    def loss_fn() -> Tensor:
        terms = [
            regression_uncertainty_loss(frozen[t], targets[:, t], u.task(t), mask[:, t])
            for t in range(tasks)
        ]
        present = [term for term in terms if term is not None]
        if not present:
            raise ContractError("no task has a valid sample")
        total = present[0]
        for term in present[1:]:
            total = total + term
        return total

    optimize(graph, loss_fn, Adam(graph.parameters, lr=lr), steps, after_step=u.clamp)
    return u
