"""Synthetic benchmark generators.

``generate_synthetic_mtl`` stands in for a drug-response panel: every task
reads a shared low-dimensional latent space, related tasks point in similar
directions inside one subspace, and planted outlier tasks live in the
orthogonal complement, so they share nothing with the rest.
``generate_digit_surrogate`` provides noisy stroke templates for the
imbalanced-digit benchmark when no IDX files are supplied.
"""

import logging
from typing import Iterable, Sequence

import numpy as np

from src.config.settings import DATA_DEFAULTS
from src.errors import ConfigError
from src.pipeline.dataset import LabeledImages, TaskDataset

logger = logging.getLogger(__name__)


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    # fix column signs so the basis is a deterministic function of the draw
    return q * np.sign(np.diag(r))


def generate_synthetic_mtl(
    task_count: int,
    feature_dim: int,
    latent_dim: int,
    samples: int,
    noise: Sequence[float],
    outlier_tasks: Iterable[int] = (),
    seed: int = 0,
    relatedness_spread: float = 0.3,
) -> TaskDataset:
    """
    Generate a multi-output regression problem with planted outlier tasks.

    Args:
        task_count: Number of tasks T (>= 2)
        feature_dim: Feature dimension D
        latent_dim: Latent dimension H* (<= D)
        samples: Number of samples N
        noise: Per-task noise standard deviations, length T, all > 0
        outlier_tasks: Indices of tasks drawn orthogonally to the related ones
        seed: Random seed
        relatedness_spread: Deviation of related task directions from their
            common direction

    Returns:
        TaskDataset whose provenance holds the generator arguments and the
        ground-truth weights of every task
    """
    outliers = sorted(set(int(t) for t in outlier_tasks))
    noise = np.asarray(noise, dtype=np.float64)
    if task_count < 2:
        raise ConfigError("task_count", f"must be >= 2, got {task_count}")
    if latent_dim < 1 or latent_dim > feature_dim:
        raise ConfigError(
            "latent_dim", f"must be in [1, feature_dim={feature_dim}], got {latent_dim}"
        )
    if samples < 1:
        raise ConfigError("samples", f"must be >= 1, got {samples}")
    if noise.shape != (task_count,) or np.any(noise <= 0):
        raise ConfigError("noise", f"need {task_count} positive values, got {noise.tolist()}")
    if any(t < 0 or t >= task_count for t in outliers):
        raise ConfigError("outlier_tasks", f"indices must be in [0, {task_count}), got {outliers}")
    if len(outliers) == task_count:
        raise ConfigError("outlier_tasks", "at least one task must be related")
    if outliers and latent_dim < 2:
        raise ConfigError("latent_dim", "outlier tasks need latent_dim >= 2")

    rng = np.random.default_rng(seed)
    projection = _orthonormal(rng, feature_dim, latent_dim)
    basis = _orthonormal(rng, latent_dim, latent_dim)
    outlier_rank = max(1, latent_dim // 2) if outliers else 0
    related_basis = basis[:, : latent_dim - outlier_rank]
    outlier_basis = basis[:, latent_dim - outlier_rank :]

    common = rng.standard_normal(related_basis.shape[1])
    latent_weights = np.zeros((latent_dim, task_count))
    for t in range(task_count):
        if t in outliers:
            v = outlier_basis @ rng.standard_normal(outlier_rank)
        else:
            deviation = relatedness_spread * rng.standard_normal(related_basis.shape[1])
            v = related_basis @ (common + deviation)
        latent_weights[:, t] = v / np.linalg.norm(v)

    X = rng.standard_normal((samples, feature_dim))
    latent = X @ projection
    Y = latent @ latent_weights + rng.standard_normal((samples, task_count)) * noise
    weights = projection @ latent_weights

    logger.info(
        "generated %d samples, %d tasks (%d outliers), D=%d, H*=%d",
        samples,
        task_count,
        len(outliers),
        feature_dim,
        latent_dim,
    )
    return TaskDataset(
        X=X,
        targets=Y,
        mask=np.ones_like(Y, dtype=bool),
        split="all",
        task_kind="regression",
        provenance={
            "source": "synthetic-mtl",
            "task_count": task_count,
            "feature_dim": feature_dim,
            "latent_dim": latent_dim,
            "samples": samples,
            "noise": noise.tolist(),
            "outlier_tasks": outliers,
            "related_tasks": [t for t in range(task_count) if t not in outliers],
            "seed": seed,
            "relatedness_spread": relatedness_spread,
            "task_weights": weights.T.tolist(),
        },
    )


def generate_digit_surrogate(
    per_class: int,
    seed: int,
    side: int = DATA_DEFAULTS["digit_side"],
    noise: float = DATA_DEFAULTS["digit_noise"],
    template_seed: int = 0,
) -> LabeledImages:
    """
    Noisy digit-like images, ``per_class`` of each of the ten classes.

    Every class owns a fixed stroke template drawn from ``template_seed``;
    samples add Gaussian pixel noise from ``seed`` and are clipped to [0, 1].
    Train and test sets built with the same ``template_seed`` share classes.
    """
    classes = DATA_DEFAULTS["num_digits"]
    template_rng = np.random.default_rng(template_seed)
    base = (template_rng.random((side, side)) < 0.2).astype(np.float64)
    strokes = (template_rng.random((classes, side, side)) < 0.12).astype(np.float64)
    templates = np.clip(base[None] + strokes, 0.0, 1.0)

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(classes), per_class))
    images = templates[labels] + noise * rng.standard_normal((labels.size, side, side))
    return LabeledImages(images=np.clip(images, 0.0, 1.0), labels=labels.astype(np.int64))
