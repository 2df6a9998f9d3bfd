"""Expression preprocessing: library-size correction, log transform, standardization."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.preprocessing import StandardScaler

from src.errors import DataError, DimensionError

# Columns whose spread is below this fraction of their magnitude are constant.
_CONSTANT_TOLERANCE = 1e-12


@dataclass
class CleaningResult:
    """Result of preprocessing operations."""

    cleaned: np.ndarray
    library_sizes: np.ndarray
    target_size: float
    constant_columns: list[int]
    cleaning_log: list[str]


def standardize(X: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """
    Centre every column and scale it to unit (population) variance.

    Args:
        X: N×D matrix

    Returns:
        Standardized matrix and the indices of constant columns, which are
        returned as all zeros
    """
    X = np.asarray(X, dtype=np.float64)
    scaler = StandardScaler()
    out = scaler.fit_transform(X)
    std = np.sqrt(scaler.var_)
    constant = std <= _CONSTANT_TOLERANCE * np.maximum(1.0, np.abs(scaler.mean_))
    out[:, constant] = 0.0
    return out, np.flatnonzero(constant).tolist()


class ExpressionCleaner:
    """Normalizes raw expression counts into standardized features."""

    def __init__(self):
        """Initialize the cleaner."""
        self.cleaning_log: list[str] = []

    def correct_library_size(
        self, X: np.ndarray, sample_ids: Optional[Sequence[str]] = None
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """
        Rescale every sample to the median library size.

        Args:
            X: Raw non-negative counts, samples × genes
            sample_ids: Names used in error messages

        Returns:
            Corrected matrix, per-sample library sizes, and the target size
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"expression matrix must be 2-D, got shape {list(X.shape)}")
        negative = np.argwhere(X < 0)
        if negative.size:
            row, col = (int(i) for i in negative[0])
            raise DataError(
                f"negative count {X[row, col]} at sample "
                f"{self._name(row, sample_ids)}, gene {col}"
            )
        sizes = X.sum(axis=1)
        empty = np.flatnonzero(sizes == 0)
        if empty.size:
            raise DataError(f"sample {self._name(int(empty[0]), sample_ids)} has no counts")
        target = float(np.median(sizes))
        self.cleaning_log.append(f"Rescaled {X.shape[0]} samples to library size {target:g}")
        return X / sizes[:, None] * target, sizes, target

    def preprocess(
        self, X: np.ndarray, sample_ids: Optional[Sequence[str]] = None
    ) -> CleaningResult:
        """
        Library-size correction, ``log(1 + x)``, then column standardization.

        Args:
            X: Raw non-negative counts, samples × genes
            sample_ids: Names used in error messages

        Returns:
            CleaningResult with the standardized features
        """
        self.cleaning_log = []
        corrected, sizes, target = self.correct_library_size(X, sample_ids)
        logged = np.log1p(corrected)
        self.cleaning_log.append("Applied log(1 + x)")
        cleaned, constant = standardize(logged)
        if constant:
            self.cleaning_log.append(f"Zeroed {len(constant)} constant columns")
        self.cleaning_log.append(f"Standardized {cleaned.shape[1]} columns")
        return CleaningResult(
            cleaned=cleaned,
            library_sizes=sizes,
            target_size=target,
            constant_columns=constant,
            cleaning_log=self.cleaning_log.copy(),
        )

    @staticmethod
    def _name(row: int, sample_ids: Optional[Sequence[str]]) -> str:
        return repr(sample_ids[row]) if sample_ids is not None else str(row)


def preprocess_expression(X: np.ndarray, sample_ids: Optional[Sequence[str]] = None) -> np.ndarray:
    """Standardized features from raw counts (see :class:`ExpressionCleaner`)."""
    return ExpressionCleaner().preprocess(X, sample_ids).cleaned
