"""Experiment orchestration and the two benchmark protocols.

``run_experiment`` turns a validated ExperimentConfig into run sets and
negative-transfer reports. The synthetic NT benchmark and the imbalanced
digits benchmark are thin protocols on top of it.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.config.settings import (
    BENCHMARK_DEFAULTS,
    DATA_DEFAULTS,
    EPOCHS_BY_BENCHMARK,
    MODEL_DEFAULTS,
    OUTPUT_DIR,
)
from src.errors import ContractError
from src.evaluation.metrics import metric_name
from src.evaluation.transfer import NTReport, aggregate_runs, negative_transfer
from src.mtl.losses import RegularizerConfig
from src.mtl.models import ModelSpec, Variant
from src.pipeline.cleaner import preprocess_expression
from src.pipeline.dataset import DatasetSplit, LabeledImages, train_test_split
from src.pipeline.loader import load_expression_csv, read_idx_dataset
from src.pipeline.sampler import ImbalanceSchedule, digits_to_tasks, sample_imbalanced
from src.pipeline.synthetic import generate_digit_surrogate, generate_synthetic_mtl
from src.pipeline.validator import ExperimentConfig
from src.training.runs import RunResult, run_set
from src.training.trainer import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Run sets per variant and reports per multi-task variant."""

    config: ExperimentConfig
    split: DatasetSplit
    runs: dict[str, list[RunResult]] = field(default_factory=dict)
    per_run_reports: dict[str, list[tuple[int, NTReport]]] = field(default_factory=dict)
    reports: dict[str, NTReport] = field(default_factory=dict)

    @property
    def failures(self) -> list[RunResult]:
        return [r for results in self.runs.values() for r in results if not r.ok]


def _digit_sources(data: dict, paths: dict[str, str]) -> tuple[LabeledImages, LabeledImages]:
    if "train_images" in paths:
        train = read_idx_dataset(paths["train_images"], paths["train_labels"])
        test = read_idx_dataset(paths["test_images"], paths["test_labels"])
        return train, test
    seed = int(data["seed"])
    train = generate_digit_surrogate(int(data["source_per_class"]), seed=seed)
    test = generate_digit_surrogate(int(data["test_per_class"]), seed=seed + 1)
    return train, test


def prepare_data(cfg: ExperimentConfig) -> DatasetSplit:
    """Load or generate the benchmark data and split it into train and test."""
    data = cfg.data
    if cfg.benchmark == "synthetic-mtl":
        outliers = list(data["outlier_tasks"])
        noise = [
            data["outlier_noise"] if t in outliers else data["related_noise"]
            for t in range(data["task_count"])
        ]
        full = generate_synthetic_mtl(
            task_count=data["task_count"],
            feature_dim=data["feature_dim"],
            latent_dim=data["latent_dim"],
            samples=data["samples"],
            noise=noise,
            outlier_tasks=outliers,
            seed=data["seed"],
        )
        return train_test_split(full, data["test_fraction"], data["seed"])

    if cfg.benchmark == "mnist-imbalanced":
        source, test_source = _digit_sources(data, cfg.input_paths)
        schedule = ImbalanceSchedule.geometric(
            max_count=data["imbalance_max"],
            ratio=data["imbalance_ratio"],
            classes=DATA_DEFAULTS["num_digits"],
            seed=data["seed"],
        )
        train = sample_imbalanced(source, schedule)
        test = digits_to_tasks(test_source, split="test", provenance={"samples": len(test_source)})
        return DatasetSplit(train=train, test=test)

    raw = load_expression_csv(cfg.input_paths["features"], cfg.input_paths["targets"])
    cleaned = raw.with_features(preprocess_expression(raw.X, raw.sample_ids))
    return train_test_split(cleaned, data["test_fraction"], data["seed"])


def model_spec(cfg: ExperimentConfig, split: DatasetSplit, variant: str) -> ModelSpec:
    train = split.train
    return ModelSpec(
        input_dim=train.n_features,
        hidden_dims=cfg.hidden_dims,
        task_count=train.n_tasks,
        task_kind=train.task_kind,
        variant=Variant(variant),
        num_classes=train.num_classes,
        reg=cfg.reg,
        s_max=cfg.train.s_max,
    )


def compare_with_stl(
    stl_runs: Sequence[RunResult],
    variant_runs: Sequence[RunResult],
    variant: str,
    metric: str,
    epsilon: float,
    task_names: Sequence[str] = (),
    config_digest: str = "",
) -> tuple[list[tuple[int, NTReport]], Optional[NTReport]]:
    """Per-seed reports for seeds where both runs succeeded, plus their aggregate."""
    stl_by_seed = {r.seed: r for r in stl_runs if r.ok}
    reports = [
        (
            r.seed,
            negative_transfer(
                stl_by_seed[r.seed].metrics,
                r.metrics,
                epsilon,
                variant=variant,
                metric=metric,
                task_names=task_names,
                config_digest=config_digest,
            ),
        )
        for r in variant_runs
        if r.ok and r.seed in stl_by_seed
    ]
    return reports, (aggregate_runs([report for _, report in reports]) if reports else None)


def run_experiment(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    checkpoint_root: Optional[Path] = None,
    split: Optional[DatasetSplit] = None,
) -> ExperimentResult:
    """
    Train every configured variant over the seed list and build NT reports.

    Args:
        cfg: Validated experiment configuration
        workers: Worker pool bound for each run set
        checkpoint_root: Directory receiving ``<variant>/<seed>/`` abort checkpoints
        split: Pre-built data; loaded from ``cfg`` when omitted

    Returns:
        ExperimentResult with reports for every variant that has an STL pair
    """
    split = prepare_data(cfg) if split is None else split
    result = ExperimentResult(config=cfg, split=split)
    for variant in cfg.variants:
        fitter = cfg.stl_baseline if variant == Variant.STL.value else "network"
        result.runs[variant] = run_set(
            model_spec(cfg, split, variant),
            split.train,
            split.test,
            cfg.train,
            workers=workers,
            fitter=fitter,
            checkpoint_root=None if checkpoint_root is None else checkpoint_root / variant,
        )

    stl_runs = result.runs.get(Variant.STL.value)
    if stl_runs is None:
        return result
    metric = metric_name(split.train.task_kind)
    for variant in cfg.variants:
        if variant == Variant.STL.value:
            continue
        per_run, aggregated = compare_with_stl(
            stl_runs,
            result.runs[variant],
            variant,
            metric,
            cfg.epsilon,
            split.train.task_names,
            cfg.digest,
        )
        result.per_run_reports[variant] = per_run
        if aggregated is not None:
            result.reports[variant] = aggregated
        else:
            logger.warning("no successful seed pairs for %s vs STL", variant)
    return result


# -- synthetic negative-transfer benchmark -----------------------------------


@dataclass
class SyntheticBenchmarkOutcome:
    master_seed: int
    mean_nt_counts: dict[str, float]
    related_means: dict[str, float]

    @property
    def ordering_holds(self) -> bool:
        """UAMTFL ≤ AMTFL ≤ MTL on NT counts, and every variant beats STL on related tasks."""
        nt = self.mean_nt_counts
        if not nt["UAMTFL"] <= nt["AMTFL"] <= nt["MTL"]:
            return False
        stl = self.related_means["STL"]
        return all(self.related_means[v] < stl for v in ("MTL", "AMTFL", "UAMTFL"))


def synthetic_nt_config(
    master_seed: int,
    seeds: Sequence[int] = (0, 1, 2),
    epochs: int = EPOCHS_BY_BENCHMARK["synthetic-mtl"],
    output_dir: Path = OUTPUT_DIR,
) -> ExperimentConfig:
    data = dict(DATA_DEFAULTS["synthetic"])
    data.update(seed=master_seed, test_fraction=DATA_DEFAULTS["test_fraction"])
    tuned = BENCHMARK_DEFAULTS["synthetic-mtl"]
    return ExperimentConfig(
        benchmark="synthetic-mtl",
        variants=tuple(v.value for v in Variant),
        train=TrainConfig(
            epochs=epochs, learning_rate=tuned["learning_rate"], seeds=tuple(seeds)
        ),
        reg=RegularizerConfig(),
        hidden_dims=tuple(tuned["hidden_dims"]),
        data=data,
        stl_baseline="ridge",
        output_dir=output_dir,
    )


def synthetic_nt_benchmark(
    master_seed: int,
    seeds: Sequence[int] = (0, 1, 2),
    epochs: int = EPOCHS_BY_BENCHMARK["synthetic-mtl"],
    workers: Optional[int] = None,
) -> SyntheticBenchmarkOutcome:
    """Run all four methods on the planted-outlier problem drawn from ``master_seed``."""
    cfg = synthetic_nt_config(master_seed, seeds, epochs)
    result = run_experiment(cfg, workers=workers)
    if result.failures:
        raise ContractError(f"{len(result.failures)} benchmark runs failed")
    related = result.split.train.provenance["related_tasks"]
    mean_nt = {
        variant: float(np.mean([report.nt_count for _, report in reports]))
        for variant, reports in result.per_run_reports.items()
    }
    related_means = {"STL": float(np.mean([result.reports["MTL"].stl[t] for t in related]))}
    for variant, report in result.reports.items():
        related_means[variant] = float(np.mean([report.mtl[t] for t in related]))
    outcome = SyntheticBenchmarkOutcome(master_seed, mean_nt, related_means)
    logger.info(
        "synthetic benchmark %d: NT %s, related %s, ordering %s",
        master_seed,
        mean_nt,
        related_means,
        outcome.ordering_holds,
    )
    return outcome


# -- imbalanced digits benchmark ---------------------------------------------


@dataclass
class DigitsBenchmarkOutcome:
    smallest_tasks: tuple[int, ...]
    deltas: dict[int, tuple[float, ...]]

    @property
    def improved_seeds(self) -> list[int]:
        return [seed for seed, d in self.deltas.items() if all(x <= 0 for x in d)]

    @property
    def majority_improved(self) -> bool:
        return len(self.improved_seeds) * 2 > len(self.deltas)


def digits_config(
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    epochs: int = EPOCHS_BY_BENCHMARK["mnist-imbalanced"],
    data_seed: int = 0,
    output_dir: Path = OUTPUT_DIR,
) -> ExperimentConfig:
    return ExperimentConfig(
        benchmark="mnist-imbalanced",
        variants=(Variant.STL.value, Variant.UAMTFL.value),
        train=TrainConfig(epochs=epochs, seeds=tuple(seeds)),
        reg=RegularizerConfig(),
        hidden_dims=tuple(MODEL_DEFAULTS["hidden_dims"]),
        data={
            "imbalance_max": DATA_DEFAULTS["imbalance_max"],
            "imbalance_ratio": DATA_DEFAULTS["imbalance_ratio"],
            "seed": data_seed,
            "source_per_class": DATA_DEFAULTS["imbalance_max"],
            "test_per_class": DATA_DEFAULTS["digit_test_per_class"],
        },
        stl_baseline="network",
        output_dir=output_dir,
    )


def digits_benchmark(
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    epochs: int = EPOCHS_BY_BENCHMARK["mnist-imbalanced"],
    workers: Optional[int] = None,
    cfg: Optional[ExperimentConfig] = None,
) -> DigitsBenchmarkOutcome:
    """UAMTFL against network STL on the two digits with the fewest training samples."""
    cfg = digits_config(seeds, epochs) if cfg is None else replace(
        cfg, variants=(Variant.STL.value, Variant.UAMTFL.value)
    )
    result = run_experiment(cfg, workers=workers)
    counts = result.split.train.provenance["schedule"]
    smallest = tuple(int(t) for t in np.argsort(counts, kind="stable")[:2])
    deltas = {
        int(seed): tuple(report.delta[t] for t in smallest)
        for seed, report in result.per_run_reports["UAMTFL"]
    }
    logger.info("digits benchmark: deltas on tasks %s: %s", smallest, deltas)
    return DigitsBenchmarkOutcome(smallest, deltas)
