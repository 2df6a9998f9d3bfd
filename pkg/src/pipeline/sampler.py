"""Imbalanced digit sampling and the per-digit task view."""

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from src.config.settings import DATA_DEFAULTS
from src.errors import ConfigError, DataError
from src.pipeline.dataset import LabeledImages, TaskDataset

logger = logging.getLogger(__name__)


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


@dataclass(frozen=True)
class ImbalanceSchedule:
    """Per-class training counts, non-increasing from class 0."""

    counts: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts:
            raise ConfigError("schedule.counts", "must list at least one class")
        if any(c < 1 for c in counts):
            raise ConfigError("schedule.counts", f"every count must be >= 1, got {list(counts)}")
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise ConfigError("schedule.counts", f"must be non-increasing, got {list(counts)}")

    @classmethod
    def geometric(
        cls,
        max_count: int = DATA_DEFAULTS["imbalance_max"],
        ratio: float = DATA_DEFAULTS["imbalance_ratio"],
        classes: int = DATA_DEFAULTS["num_digits"],
        seed: int = 0,
    ) -> "ImbalanceSchedule":
        """Chained decay ``c_0 = max_count, c_k = round(ratio · c_{k-1})``, floored at 1."""
        counts = [int(max_count)]
        for _ in range(classes - 1):
            counts.append(max(1, _round_half_up(ratio * counts[-1])))
        return cls(tuple(counts), seed)


def digits_to_tasks(
    source: LabeledImages, split: str, provenance: Optional[dict[str, Any]] = None
) -> TaskDataset:
    """One binary task per digit: ``targets[n, t] = 1`` iff sample n shows digit t."""
    classes = DATA_DEFAULTS["num_digits"]
    targets = (source.labels[:, None] == np.arange(classes)[None, :]).astype(np.float64)
    return TaskDataset(
        X=source.flat(),
        targets=targets,
        mask=np.ones_like(targets, dtype=bool),
        split=split,
        task_kind="classification",
        num_classes=2,
        task_names=tuple(f"digit{d}" for d in range(classes)),
        provenance=dict(provenance or {}),
    )


def sample_imbalanced(source: LabeledImages, sched: ImbalanceSchedule) -> TaskDataset:
    """
    Draw exactly ``sched.counts[k]`` training examples of every digit k.

    Sampling is without replacement and only depends on ``sched.seed``.

    Args:
        source: Balanced labeled training images
        sched: Per-class counts and seed

    Returns:
        Training TaskDataset of per-digit binary tasks
    """
    rng = np.random.default_rng(sched.seed)
    chosen = []
    for digit, count in enumerate(sched.counts):
        pool = np.flatnonzero(source.labels == digit)
        if pool.size < count:
            raise DataError(
                f"class {digit} has {pool.size} source examples, schedule needs {count}"
            )
        chosen.append(rng.choice(pool, size=count, replace=False))
    indices = np.sort(np.concatenate(chosen))
    logger.info("sampled %d imbalanced training digits: %s", indices.size, list(sched.counts))
    subset = LabeledImages(images=source.images[indices], labels=source.labels[indices])
    return digits_to_tasks(
        subset,
        split="train",
        provenance={
            "schedule": list(sched.counts),
            "seed": sched.seed,
            "indices": indices.tolist(),
        },
    )
