"""Seeded run sets: one full train + evaluate per seed."""

import logging
import time
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Optional

import numpy as np

from src.config.settings import EVAL_DEFAULTS, RUNTIME_CONFIG
from src.errors import ConfigError, LabError
from src.evaluation.baselines import ridge_metrics
from src.evaluation.metrics import per_task_metrics
from src.mtl.models import ModelSpec, ModelState, Variant
from src.pipeline.dataset import TaskDataset
from src.training.trainer import RunHistory, TrainConfig, train

logger = logging.getLogger(__name__)

FITTERS = ("network", "ridge")


@dataclass
class RunResult:
    """Outcome of one seed; ``error`` is set and the rest empty when it failed."""

    seed: int
    variant: str
    history: Optional[RunHistory] = None
    metrics: Optional[np.ndarray] = None
    state: Optional[ModelState] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(
    spec: ModelSpec,
    train_data: TaskDataset,
    test_data: TaskDataset,
    cfg: TrainConfig,
    seed: int,
    fitter: str,
    checkpoint_dir: Optional[Path],
) -> RunResult:
    variant = spec.variant.value
    try:
        if fitter == "ridge":
            started = time.perf_counter()
            metrics = ridge_metrics(train_data, test_data, EVAL_DEFAULTS["ridge_alpha"])
            history = RunHistory(seed=seed, variant=variant, fitter="ridge")
            history.wall_clock_seconds = time.perf_counter() - started
            return RunResult(seed, variant, history, metrics)
        result = train(spec, train_data, cfg, seed, checkpoint_dir)
        metrics = per_task_metrics(result.state, test_data)
        return RunResult(seed, variant, result.history, metrics, result.state)
    except LabError as exc:
        logger.error("%s run with seed %d failed: %s", variant, seed, exc)
        return RunResult(seed, variant, error=str(exc))
    except Exception as exc:
        logger.exception("%s run with seed %d crashed", variant, seed)
        return RunResult(seed, variant, error=f"{type(exc).__name__}: {exc}")


def run_set(
    spec: ModelSpec,
    train_data: TaskDataset,
    test_data: TaskDataset,
    cfg: TrainConfig,
    workers: Optional[int] = None,
    fitter: str = "network",
    checkpoint_root: Optional[Path] = None,
) -> list[RunResult]:
    """
    Train and evaluate ``spec`` once per seed in ``cfg.seeds``.

    Args:
        spec: Model specification (its seed is replaced per run)
        train_data: Training partition
        test_data: Test partition
        cfg: Training settings and seed list
        workers: Pool size; runs execute in-process when 1
        fitter: ``"network"`` or ``"ridge"`` (regression STL only)
        checkpoint_root: Directory under which ``<seed>/`` receives the
            last good checkpoint of an aborted run

    Returns:
        One RunResult per seed, in seed-list order
    """
    if fitter not in FITTERS:
        raise ConfigError("stl_baseline", f"unknown fitter {fitter!r}")
    if fitter == "ridge" and spec.variant is not Variant.STL:
        raise ConfigError("stl_baseline", "only the STL baseline can be fitted by ridge")
    workers = RUNTIME_CONFIG["workers"] if workers is None else workers
    if workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {workers}")

    jobs = [
        (
            spec,
            train_data,
            test_data,
            cfg,
            seed,
            fitter,
            None if checkpoint_root is None else checkpoint_root / str(seed),
        )
        for seed in cfg.seeds
    ]
    logger.info(
        "running %s over %d seeds with %d worker(s)", spec.variant.value, len(jobs), workers
    )
    if workers == 1 or len(jobs) == 1:
        results = [_run_one(*job) for job in jobs]
    else:
        with Pool(min(workers, len(jobs))) as pool:
            results = pool.starmap(_run_one, jobs)

    failed = [r.seed for r in results if not r.ok]
    if failed:
        logger.warning("%s: %d of %d runs failed (seeds %s)", spec.variant.value, len(failed), len(results), failed)
    return results
