"""Experiment configuration validation."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from src.config.settings import (
    BENCHMARK_DEFAULTS,
    DATA_DEFAULTS,
    EPOCHS_BY_BENCHMARK,
    EVAL_DEFAULTS,
    MODEL_DEFAULTS,
    OUTPUT_DIR,
    REGULARIZER_DEFAULTS,
    TRAIN_DEFAULTS,
)
from src.errors import ConfigError
from src.mtl.losses import RegularizerConfig
from src.mtl.models import Variant
from src.pipeline.loader import file_digest
from src.training.trainer import TrainConfig

BENCHMARKS = ("mnist-imbalanced", "synthetic-mtl", "expression-csv")

DATA_FIELDS = {
    "synthetic-mtl": {
        "task_count",
        "feature_dim",
        "latent_dim",
        "samples",
        "related_noise",
        "outlier_noise",
        "outlier_tasks",
        "seed",
        "test_fraction",
    },
    "mnist-imbalanced": {
        "train_images",
        "train_labels",
        "test_images",
        "test_labels",
        "imbalance_max",
        "imbalance_ratio",
        "seed",
        "source_per_class",
        "test_per_class",
    },
    "expression-csv": {"features", "targets", "test_fraction", "seed"},
}

PATH_FIELDS = {
    "mnist-imbalanced": ("train_images", "train_labels", "test_images", "test_labels"),
    "expression-csv": ("features", "targets"),
}

TOP_LEVEL = {
    "benchmark",
    "variants",
    "train",
    "regularizer",
    "model",
    "data",
    "evaluation",
    "output_dir",
}


@dataclass
class ValidationResult:
    """Result of validation operations."""

    is_valid: bool
    errors: list[str]
    warnings: list[str]
    metadata: Dict[str, Any]


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved experiment."""

    benchmark: str
    variants: tuple[str, ...]
    train: TrainConfig
    reg: RegularizerConfig
    hidden_dims: tuple[int, ...]
    data: dict[str, Any] = field(default_factory=dict)
    input_paths: dict[str, str] = field(default_factory=dict)
    input_digests: dict[str, str] = field(default_factory=dict)
    epsilon: float = EVAL_DEFAULTS["epsilon"]
    stl_baseline: str = "network"
    output_dir: Path = OUTPUT_DIR

    def to_dict(self) -> dict[str, Any]:
        """Everything that determines the results.

        Input files enter by content (SHA-256) and as written in the config, so
        the digest does not depend on where the config was loaded from. The
        output location is excluded.
        """
        train = self.train.to_dict()
        train.pop("reg")
        return {
            "benchmark": self.benchmark,
            "variants": list(self.variants),
            "train": train,
            "regularizer": self.reg.to_dict(),
            "model": {"hidden_dims": list(self.hidden_dims)},
            "data": self.data,
            "inputs": dict(self.input_digests),
            "evaluation": {"epsilon": self.epsilon, "stl_baseline": self.stl_baseline},
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @property
    def run_dir(self) -> Path:
        return self.output_dir / self.digest[:12]


def _default_data(benchmark: str) -> dict[str, Any]:
    if benchmark == "synthetic-mtl":
        defaults = dict(DATA_DEFAULTS["synthetic"])
        defaults.update(seed=0, test_fraction=DATA_DEFAULTS["test_fraction"])
        return defaults
    if benchmark == "mnist-imbalanced":
        return {
            "imbalance_max": DATA_DEFAULTS["imbalance_max"],
            "imbalance_ratio": DATA_DEFAULTS["imbalance_ratio"],
            "seed": 0,
            "source_per_class": DATA_DEFAULTS["imbalance_max"],
            "test_per_class": DATA_DEFAULTS["digit_test_per_class"],
        }
    return {"test_fraction": DATA_DEFAULTS["test_fraction"], "seed": 0}


class ConfigValidator:
    """Validates experiment configuration files."""

    def __init__(self):
        """Initialize the validator."""
        self.supported_formats = [".json"]

    def validate_file(
        self, filepath: Path, overrides: Optional[Dict[str, Any]] = None
    ) -> ValidationResult:
        """
        Validate an experiment configuration and resolve it.

        Args:
            filepath: Path to the JSON configuration
            overrides: Command-line values for ``seeds``, ``epsilon`` and
                ``output_dir``, applied before the digest is computed

        Returns:
            ValidationResult; on success ``metadata["config"]`` holds the
            ExperimentConfig and ``metadata["digest"]`` its digest
        """
        errors: list[str] = []
        warnings: list[str] = []
        metadata: Dict[str, Any] = {}

        # Check file exists
        if not filepath.exists():
            errors.append(f"File not found: {filepath}")
            return ValidationResult(False, errors, warnings, metadata)

        # Check file format
        if filepath.suffix.lower() not in self.supported_formats:
            errors.append(f"Unsupported format: {filepath.suffix}")
            return ValidationResult(False, errors, warnings, metadata)

        try:
            raw = json.loads(filepath.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
            errors.append(f"Cannot read file: {str(e)}")
            return ValidationResult(False, errors, warnings, metadata)
        if not isinstance(raw, dict):
            errors.append("Configuration must be a JSON object")
            return ValidationResult(False, errors, warnings, metadata)

        config = self.build_config(raw, filepath.parent, overrides or {}, errors, warnings)
        if config is not None and not errors:
            metadata["config"] = config
            metadata["digest"] = config.digest
            metadata["benchmark"] = config.benchmark
            metadata["variants"] = list(config.variants)
            metadata["seeds"] = list(config.train.seeds)

        is_valid = len(errors) == 0
        return ValidationResult(is_valid, errors, warnings, metadata)

    def build_config(
        self,
        raw: Dict[str, Any],
        base_dir: Path,
        overrides: Dict[str, Any],
        errors: list[str],
        warnings: list[str],
    ) -> Optional[ExperimentConfig]:
        """Turn a parsed JSON document into an ExperimentConfig, collecting problems."""
        for key in sorted(set(raw) - TOP_LEVEL):
            warnings.append(f"Unknown key ignored: {key}")

        benchmark = raw.get("benchmark")
        if benchmark not in BENCHMARKS:
            errors.append(f"benchmark: must be one of {list(BENCHMARKS)}, got {benchmark!r}")
            return None

        variants = raw.get("variants", [v.value for v in Variant])
        if not isinstance(variants, list) or not variants:
            errors.append("variants: must be a non-empty list")
        else:
            for name in variants:
                if name not in {v.value for v in Variant}:
                    errors.append(f"variants: unknown variant {name!r}")
            if len(set(variants)) != len(variants):
                errors.append("variants: duplicates are not allowed")
            if Variant.STL.value not in variants:
                warnings.append("variants: no STL baseline, negative-transfer reports are skipped")

        reg = self._regularizer(raw.get("regularizer", {}), errors)
        train = self._train(raw.get("train", {}), benchmark, overrides, errors)
        default_hidden = BENCHMARK_DEFAULTS.get(benchmark, {}).get(
            "hidden_dims", MODEL_DEFAULTS["hidden_dims"]
        )
        hidden = raw.get("model", {}).get("hidden_dims", default_hidden)
        if not isinstance(hidden, list) or not hidden or any(
            not isinstance(h, int) or h < 1 for h in hidden
        ):
            errors.append(f"model.hidden_dims: must be a non-empty list of positive ints, got {hidden!r}")

        data, input_paths = self._data(raw.get("data", {}), benchmark, base_dir, errors, warnings)

        evaluation = raw.get("evaluation", {})
        epsilon = overrides.get("epsilon", evaluation.get("epsilon", EVAL_DEFAULTS["epsilon"]))
        if not isinstance(epsilon, (int, float)) or epsilon < 0:
            errors.append(f"evaluation.epsilon: must be >= 0, got {epsilon!r}")
        default_baseline = "network" if benchmark == "mnist-imbalanced" else "ridge"
        stl_baseline = evaluation.get("stl_baseline", default_baseline)
        if stl_baseline not in ("network", "ridge"):
            errors.append(f"evaluation.stl_baseline: must be 'network' or 'ridge', got {stl_baseline!r}")
        elif stl_baseline == "ridge" and benchmark == "mnist-imbalanced":
            errors.append("evaluation.stl_baseline: ridge only applies to regression benchmarks")

        output_dir = Path(overrides.get("output_dir") or raw.get("output_dir") or OUTPUT_DIR)
        if errors:
            return None
        return ExperimentConfig(
            benchmark=benchmark,
            variants=tuple(variants),
            train=train,
            reg=reg,
            hidden_dims=tuple(hidden),
            data=data,
            input_paths=input_paths,
            input_digests={key: file_digest(path) for key, path in sorted(input_paths.items())},
            epsilon=float(epsilon),
            stl_baseline=stl_baseline,
            output_dir=output_dir,
        )

    @staticmethod
    def _regularizer(section: Dict[str, Any], errors: list[str]) -> Optional[RegularizerConfig]:
        values = dict(REGULARIZER_DEFAULTS)
        unknown = set(section) - set(values)
        for key in sorted(unknown):
            errors.append(f"regularizer.{key}: unknown field")
        values.update({k: v for k, v in section.items() if k in values})
        try:
            return RegularizerConfig(**values)
        except (ConfigError, TypeError) as e:
            errors.append(str(e))
            return None

    @staticmethod
    def _train(
        section: Dict[str, Any], benchmark: str, overrides: Dict[str, Any], errors: list[str]
    ) -> Optional[TrainConfig]:
        values = {key: TRAIN_DEFAULTS[key] for key in TRAIN_DEFAULTS}
        values["epochs"] = EPOCHS_BY_BENCHMARK[benchmark]
        values.update(
            {k: v for k, v in BENCHMARK_DEFAULTS.get(benchmark, {}).items() if k in values}
        )
        for key in sorted(set(section) - set(values)):
            errors.append(f"train.{key}: unknown field")
        values.update({k: v for k, v in section.items() if k in values})
        if "seeds" in overrides:
            values["seeds"] = overrides["seeds"]
        lr = values["learning_rate"]
        if not isinstance(lr, (int, float)) or lr <= 0:
            errors.append(f"train.learning_rate: must be > 0, got {lr!r}")
            return None
        try:
            return TrainConfig(**values)
        except (ConfigError, TypeError, ValueError) as e:
            errors.append(f"train.{e}" if isinstance(e, ConfigError) else f"train: {e}")
            return None

    @staticmethod
    def _data(
        section: Dict[str, Any],
        benchmark: str,
        base_dir: Path,
        errors: list[str],
        warnings: list[str],
    ) -> tuple[dict[str, Any], dict[str, str]]:
        """Resolve data settings; paths stay as written, resolved copies are returned apart."""
        data = _default_data(benchmark)
        paths: dict[str, str] = {}
        for key in sorted(set(section) - DATA_FIELDS[benchmark]):
            errors.append(f"data.{key}: unknown field for {benchmark}")
        data.update({k: v for k, v in section.items() if k in DATA_FIELDS[benchmark]})

        for key in PATH_FIELDS.get(benchmark, ()):
            if key not in data:
                continue
            path = Path(data[key])
            if not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                errors.append(f"data.{key}: file not found: {path}")
            paths[key] = str(path)

        if benchmark == "expression-csv":
            for key in PATH_FIELDS[benchmark]:
                if key not in data:
                    errors.append(f"data.{key}: required for expression-csv")
        if benchmark == "mnist-imbalanced":
            given = [k for k in PATH_FIELDS[benchmark] if k in data]
            if given and len(given) != len(PATH_FIELDS[benchmark]):
                errors.append("data: IDX inputs need all of " + ", ".join(PATH_FIELDS[benchmark]))
            elif not given:
                warnings.append("data: no IDX files given, using the synthetic digit surrogate")
                if data["source_per_class"] < data["imbalance_max"]:
                    errors.append(
                        f"data.source_per_class: must be >= imbalance_max "
                        f"({data['imbalance_max']}), got {data['source_per_class']}"
                    )
        if "test_fraction" in data and not 0 < data["test_fraction"] < 1:
            errors.append(f"data.test_fraction: must be in (0, 1), got {data['test_fraction']!r}")
        return data, paths
