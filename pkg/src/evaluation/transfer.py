"""Negative-transfer reports against the single-task baseline.

A report compares one multi-task variant with STL task by task. Every
metric is an error (lower is better), so ``delta = variant - STL`` and a
positive delta above ``epsilon`` flags negative transfer on that task.
Run sets are aggregated by averaging metrics first and then recomputing
deltas and flags from the averages.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

from src.config.settings import EVAL_DEFAULTS
from src.errors import ContractError

Vector = tuple[float, ...]


def _vector(values: Sequence[float]) -> Vector:
    return tuple(float(v) for v in values)


def _nanmean(values: Sequence[float]) -> float:
    present = [v for v in values if not math.isnan(v)]
    return float(np.mean(present)) if present else float("nan")


def _encode(values: Sequence[float]) -> list[Optional[float]]:
    return [None if math.isnan(v) else v for v in values]


def _decode(values: Sequence[Optional[float]]) -> Vector:
    return tuple(float("nan") if v is None else float(v) for v in values)


@dataclass(frozen=True)
class NTReport:
    """Per-task comparison of one variant with STL."""

    variant: str
    metric: str
    stl: Vector
    mtl: Vector
    delta: Vector
    flags: tuple[bool, ...]
    nt_count: int
    epsilon: float
    stl_std: Vector
    mtl_std: Vector
    stl_run_means: Vector
    mtl_run_means: Vector
    task_names: tuple[str, ...] = ()
    config_digest: str = ""

    @property
    def task_count(self) -> int:
        return len(self.stl)

    @property
    def runs(self) -> int:
        return len(self.mtl_run_means)

    @property
    def mean_stl(self) -> float:
        return _nanmean(self.stl)

    @property
    def mean_mtl(self) -> float:
        return _nanmean(self.mtl)

    def to_dict(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "metric": self.metric,
            "config_digest": self.config_digest,
            "epsilon": self.epsilon,
            "nt_count": self.nt_count,
            "runs": self.runs,
            "task_names": list(self.task_names),
            "stl": _encode(self.stl),
            "mtl": _encode(self.mtl),
            "delta": _encode(self.delta),
            "flags": list(self.flags),
            "stl_std": _encode(self.stl_std),
            "mtl_std": _encode(self.mtl_std),
            "stl_run_means": _encode(self.stl_run_means),
            "mtl_run_means": _encode(self.mtl_run_means),
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> "NTReport":
        return cls(
            variant=record["variant"],
            metric=record["metric"],
            stl=_decode(record["stl"]),
            mtl=_decode(record["mtl"]),
            delta=_decode(record["delta"]),
            flags=tuple(bool(f) for f in record["flags"]),
            nt_count=int(record["nt_count"]),
            epsilon=float(record["epsilon"]),
            stl_std=_decode(record["stl_std"]),
            mtl_std=_decode(record["mtl_std"]),
            stl_run_means=_decode(record["stl_run_means"]),
            mtl_run_means=_decode(record["mtl_run_means"]),
            task_names=tuple(record.get("task_names", ())),
            config_digest=record.get("config_digest", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "NTReport":
        return cls.from_dict(json.loads(text))

    def to_frame(self) -> pd.DataFrame:
        """One row per task: task_id, task_name, stl, mtl, delta, nt_flag."""
        names = self.task_names or tuple(f"task{t}" for t in range(self.task_count))
        return pd.DataFrame(
            {
                "task_id": range(self.task_count),
                "task_name": names,
                "stl": self.stl,
                "mtl": self.mtl,
                "delta": self.delta,
                "nt_flag": self.flags,
            }
        )

    def to_csv(self, path: Path) -> Path:
        self.to_frame().to_csv(path, index=False)
        return path


def negative_transfer(
    stl: Sequence[float],
    mtl: Sequence[float],
    epsilon: float = EVAL_DEFAULTS["epsilon"],
    variant: str = "MTL",
    metric: str = "mse",
    task_names: Sequence[str] = (),
    config_digest: str = "",
) -> NTReport:
    """
    Compare one run's per-task metrics with the STL baseline.

    Args:
        stl: STL metric per task
        mtl: Variant metric per task
        epsilon: Tolerance; only ``delta > epsilon`` counts as negative transfer
        variant: Name of the compared variant
        metric: Name of the metric
        task_names: Optional task labels
        config_digest: Digest of the experiment configuration

    Returns:
        NTReport with zero standard deviations
    """
    stl_v = np.asarray(stl, dtype=np.float64)
    mtl_v = np.asarray(mtl, dtype=np.float64)
    if stl_v.shape != mtl_v.shape or stl_v.ndim != 1:
        raise ContractError(
            f"metric vectors differ in length: STL {stl_v.size}, {variant} {mtl_v.size}"
        )
    if not epsilon >= 0:
        raise ContractError(f"epsilon must be >= 0, got {epsilon}")
    return _report(
        variant,
        metric,
        stl_v,
        mtl_v,
        epsilon,
        np.zeros_like(stl_v),
        np.zeros_like(mtl_v),
        (_nanmean(stl_v),),
        (_nanmean(mtl_v),),
        tuple(task_names),
        config_digest,
    )


def _report(
    variant: str,
    metric: str,
    stl: np.ndarray,
    mtl: np.ndarray,
    epsilon: float,
    stl_std: np.ndarray,
    mtl_std: np.ndarray,
    stl_run_means: Sequence[float],
    mtl_run_means: Sequence[float],
    task_names: tuple[str, ...],
    config_digest: str,
) -> NTReport:
    delta = mtl - stl
    # absent tasks carry a NaN delta and never count as negative transfer
    flags = tuple(bool(d > epsilon) for d in delta)
    absent = np.isnan(stl) | np.isnan(mtl)
    stl_std = np.where(np.isnan(stl), np.nan, stl_std)
    mtl_std = np.where(np.isnan(mtl), np.nan, mtl_std)
    return NTReport(
        variant=variant,
        metric=metric,
        stl=_vector(stl),
        mtl=_vector(mtl),
        delta=_vector(np.where(absent, np.nan, delta)),
        flags=flags,
        nt_count=sum(flags),
        epsilon=float(epsilon),
        stl_std=_vector(stl_std),
        mtl_std=_vector(mtl_std),
        stl_run_means=_vector(stl_run_means),
        mtl_run_means=_vector(mtl_run_means),
        task_names=task_names,
        config_digest=config_digest,
    )


def _mean_and_std(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and population std over runs, ignoring NaN cells.

    Values are centred on the first present run before averaging, so that
    averaging identical rows returns them unchanged.
    """
    valid = ~np.isnan(rows)
    counts = valid.sum(axis=0)
    first = np.array(
        [rows[np.flatnonzero(valid[:, j])[0], j] if counts[j] else np.nan for j in range(rows.shape[1])]
    )
    shifted = np.where(valid, rows - np.nan_to_num(first), 0.0)
    denom = np.maximum(counts, 1)
    offset = shifted.sum(axis=0) / denom
    spread = np.where(valid, shifted - offset, 0.0)
    std = np.sqrt((spread**2).sum(axis=0) / denom)
    mean = np.where(counts > 0, first + offset, np.nan)
    return mean, np.where(counts > 0, std, np.nan)


def aggregate_runs(reports: Sequence[NTReport]) -> NTReport:
    """
    Average per-run reports of one variant into a run-set report.

    Args:
        reports: Reports sharing task count, epsilon, variant and metric

    Returns:
        NTReport over the averaged metrics with per-task run-set std
    """
    if not reports:
        raise ContractError("no reports to aggregate")
    head = reports[0]
    for report in reports[1:]:
        if report.task_count != head.task_count:
            raise ContractError(
                f"reports cover {report.task_count} and {head.task_count} tasks"
            )
        if report.epsilon != head.epsilon:
            raise ContractError(f"reports use epsilon {report.epsilon} and {head.epsilon}")
        if (report.variant, report.metric) != (head.variant, head.metric):
            raise ContractError(
                f"cannot merge {report.variant}/{report.metric} into {head.variant}/{head.metric}"
            )
        if report.config_digest != head.config_digest:
            raise ContractError("reports come from different configurations")

    stl_mean, stl_std = _mean_and_std(np.array([r.stl for r in reports]))
    mtl_mean, mtl_std = _mean_and_std(np.array([r.mtl for r in reports]))
    if len(reports) == 1:
        stl_std, mtl_std = np.asarray(head.stl_std), np.asarray(head.mtl_std)
    return _report(
        head.variant,
        head.metric,
        stl_mean,
        mtl_mean,
        head.epsilon,
        stl_std,
        mtl_std,
        [m for r in reports for m in r.stl_run_means],
        [m for r in reports for m in r.mtl_run_means],
        head.task_names,
        head.config_digest,
    )

