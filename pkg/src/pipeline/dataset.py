"""Immutable multi-task datasets."""

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from src.errors import ContractError, DimensionError


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Batch:
    """A minibatch: features, N×T targets and N×T validity mask."""

    x: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class TaskDataset:
    """Feature matrix plus per-task targets and a validity mask.

    ``targets[n, t]`` is a class label (stored as float) for classification
    tasks and a real value for regression tasks. Cells with
    ``mask[n, t] == False`` are ignored by every loss and metric; their
    stored value is irrelevant (NaN is allowed).
    """

    X: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    split: str = "train"
    task_kind: str = "regression"
    num_classes: int = 2
    task_names: tuple[str, ...] = ()
    sample_ids: tuple[str, ...] = ()
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        targets = _frozen(self.targets, np.float64)
        mask = _frozen(self.mask, bool)
        if X.ndim != 2:
            raise DimensionError(f"X must be N×D, got shape {list(X.shape)}")
        if targets.ndim != 2 or targets.shape[0] != X.shape[0]:
            raise DimensionError(
                f"targets shape {list(targets.shape)} does not match {X.shape[0]} samples"
            )
        if mask.shape != targets.shape:
            raise DimensionError(
                f"mask shape {list(mask.shape)} differs from targets {list(targets.shape)}"
            )
        if not np.all(np.isfinite(X)):
            raise ContractError("features must be finite")
        if not np.all(np.isfinite(targets[mask])):
            raise ContractError("valid targets must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "mask", mask)
        names = tuple(self.task_names) or tuple(f"task{t}" for t in range(targets.shape[1]))
        object.__setattr__(self, "task_names", names)
        ids = tuple(self.sample_ids) or tuple(str(n) for n in range(X.shape[0]))
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_tasks(self) -> int:
        return self.targets.shape[1]

    def batch(self, rows: Optional[Sequence[int]] = None) -> Batch:
        if rows is None:
            return Batch(self.X, self.targets, self.mask)
        rows = np.asarray(rows, dtype=np.int64)
        return Batch(self.X[rows], self.targets[rows], self.mask[rows])

    def subset(self, rows: Sequence[int], split: str) -> "TaskDataset":
        rows = np.asarray(rows, dtype=np.int64)
        provenance = dict(self.provenance)
        provenance["rows"] = rows.tolist()
        return TaskDataset(
            X=self.X[rows],
            targets=self.targets[rows],
            mask=self.mask[rows],
            split=split,
            task_kind=self.task_kind,
            num_classes=self.num_classes,
            task_names=self.task_names,
            sample_ids=tuple(self.sample_ids[r] for r in rows),
            provenance=provenance,
        )

    def with_features(self, X: np.ndarray) -> "TaskDataset":
        """Same targets and mask over a transformed feature matrix."""
        return TaskDataset(
            X=X,
            targets=self.targets,
            mask=self.mask,
            split=self.split,
            task_kind=self.task_kind,
            num_classes=self.num_classes,
            task_names=self.task_names,
            sample_ids=self.sample_ids,
            provenance=self.provenance,
        )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train and test partitions."""

    train: TaskDataset
    test: TaskDataset


@dataclass(frozen=True)
class LabeledImages:
    """Images scaled to [0, 1] with integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DimensionError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)


def train_test_split(dataset: TaskDataset, test_fraction: float, seed: int) -> DatasetSplit:
    """Shuffle rows with ``seed`` and cut off ``test_fraction`` of them for testing."""
    if not 0.0 < test_fraction < 1.0:
        raise ContractError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n_samples
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ContractError(f"cannot split {n} samples with test_fraction {test_fraction}")
    order = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(order[:n_test])
    train_rows = np.sort(order[n_test:])
    return DatasetSplit(
        train=dataset.subset(train_rows, "train"),
        test=dataset.subset(test_rows, "test"),
    )
