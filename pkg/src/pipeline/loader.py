"""Readers for expression/response CSV matrices and IDX digit files."""

import gzip
import hashlib
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.errors import AlignmentError, DataError, FormatError
from src.pipeline.dataset import LabeledImages, TaskDataset

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
DIGIT_CLASSES = 10

PathLike = Union[str, Path]


def file_digest(path: PathLike) -> str:
    """SHA-256 of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_matrix(path: Path, role: str) -> pd.DataFrame:
    frame = pd.read_csv(
        path, index_col=0, dtype=str, keep_default_na=False, encoding="utf-8"
    )
    frame.index = frame.index.astype(str).str.strip()
    frame.columns = [str(c).strip() for c in frame.columns]
    duplicates = frame.index[frame.index.duplicated()].unique().tolist()
    if duplicates:
        raise AlignmentError(f"duplicate sample identifiers in {role} file {path}", duplicates)
    return frame


def _parse_numbers(frame: pd.DataFrame, role: str, allow_blank: bool) -> tuple[np.ndarray, np.ndarray]:
    text = frame.apply(lambda column: column.str.strip())
    blank = (text == "").to_numpy()
    values = text.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values) & ~blank
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise DataError(
            f"{role} file: unparseable number {frame.iat[row, col]!r} "
            f"at row {frame.index[row]!r}, column {frame.columns[col]!r}"
        )
    if blank.any() and not allow_blank:
        row, col = (int(i) for i in np.argwhere(blank)[0])
        raise DataError(
            f"{role} file: missing value at row {frame.index[row]!r}, "
            f"column {frame.columns[col]!r}"
        )
    return np.where(blank, np.nan, values), ~blank


def load_expression_csv(features_path: PathLike, targets_path: PathLike) -> TaskDataset:
    """
    Load an expression matrix and a drug-response matrix aligned by sample.

    Both files are comma-separated with a header row and the sample
    identifier in the first column. The targets file has one column per
    drug; blank cells are missing responses and become ``mask == False``.
    Rows are ordered by identifier, so row order in either file is irrelevant.

    Args:
        features_path: CSV of raw expression values (samples × genes)
        targets_path: CSV of responses, e.g. IC50 (samples × drugs)

    Returns:
        TaskDataset of regression tasks with file digests in its provenance
    """
    features_path, targets_path = Path(features_path), Path(targets_path)
    features = _read_matrix(features_path, "features")
    targets = _read_matrix(targets_path, "targets")

    feature_ids, target_ids = set(features.index), set(targets.index)
    if feature_ids != target_ids:
        orphans = sorted(feature_ids ^ target_ids)
        raise AlignmentError("sample identifiers differ between features and targets", orphans)

    order = sorted(feature_ids)
    features = features.loc[order]
    targets = targets.loc[order]
    X, _ = _parse_numbers(features, "features", allow_blank=False)
    Y, mask = _parse_numbers(targets, "targets", allow_blank=True)

    logger.info(
        "loaded %d samples × %d features, %d tasks (%d missing responses)",
        X.shape[0],
        X.shape[1],
        Y.shape[1],
        int((~mask).sum()),
    )
    return TaskDataset(
        X=X,
        targets=Y,
        mask=mask,
        split="all",
        task_kind="regression",
        task_names=tuple(targets.columns),
        sample_ids=tuple(order),
        provenance={
            "source": "expression-csv",
            "features_file": features_path.name,
            "targets_file": targets_path.name,
            "features_sha256": file_digest(features_path),
            "targets_sha256": file_digest(targets_path),
            "samples": X.shape[0],
            "features": X.shape[1],
            "tasks": Y.shape[1],
        },
    )


def _open_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as handle:
            return handle.read()
    return path.read_bytes()


def read_idx(path: PathLike) -> np.ndarray:
    """
    Read an IDX image or label file.

    Args:
        path: IDX file (optionally gzip-compressed, ``.gz``)

    Returns:
        Images as float64 N×rows×cols scaled to [0, 1], or labels as int64 N
    """
    path = Path(path)
    payload = _open_bytes(path)
    if len(payload) < 8:
        raise FormatError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", payload[:4])

    if magic == IDX_IMAGES_MAGIC:
        if len(payload) < 16:
            raise FormatError(f"{path}: truncated IDX header")
        count, rows, cols = struct.unpack(">III", payload[4:16])
        expected = 16 + count * rows * cols
        if len(payload) < expected:
            raise FormatError(f"{path}: truncated, {len(payload)} of {expected} bytes")
        pixels = np.frombuffer(payload, dtype=np.uint8, count=count * rows * cols, offset=16)
        return pixels.reshape(count, rows, cols).astype(np.float64) / 255.0

    if magic == IDX_LABELS_MAGIC:
        (count,) = struct.unpack(">I", payload[4:8])
        if len(payload) < 8 + count:
            raise FormatError(f"{path}: truncated, {len(payload)} of {8 + count} bytes")
        labels = np.frombuffer(payload, dtype=np.uint8, count=count, offset=8).astype(np.int64)
        out_of_range = np.flatnonzero(labels >= DIGIT_CLASSES)
        if out_of_range.size:
            first = int(out_of_range[0])
            raise DataError(f"{path}: label {labels[first]} at index {first} outside 0-9")
        return labels

    raise FormatError(f"{path}: unknown IDX magic 0x{magic:08x}")


def read_idx_dataset(images_path: PathLike, labels_path: PathLike) -> LabeledImages:
    """Pair an IDX image file with its label file."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError(f"{images_path} / {labels_path}: expected an image and a label file")
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    logger.info("read %d digit images of %dx%d", *images.shape)
    return LabeledImages(images=images, labels=labels)
