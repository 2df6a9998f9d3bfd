"""Binary model checkpoints.

Layout (all integers little-endian u32, all values little-endian f64)::

    b"UAMTFL1"
    tensor count
    per tensor: name length, UTF-8 name bytes, rank, extents..., raw data
"""

import logging
import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from src.errors import ContractError, FormatError
from src.mtl.models import ModelState

logger = logging.getLogger(__name__)

MAGIC = b"UAMTFL1"


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, values in tensors.items():
        encoded = name.encode("utf-8")
        array = np.asarray(values, dtype="<f8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes(order="C"))
    return b"".join(chunks)


def decode_tensors(payload: bytes) -> dict[str, np.ndarray]:
    if payload[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad checkpoint magic {payload[:len(MAGIC)]!r}")
    offset = len(MAGIC)

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(payload):
            raise FormatError(f"checkpoint truncated at byte {offset}")
        chunk = payload[offset : offset + size]
        offset += size
        return chunk

    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = struct.unpack("<I", take(4))
        name = take(name_length).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape)
        tensors[name] = values.astype(np.float64)
    if offset != len(payload):
        raise FormatError(f"{len(payload) - offset} trailing bytes after last tensor")
    return tensors


def save_checkpoint(state: ModelState, path: Union[str, Path]) -> Path:
    """Write every parameter of ``state`` to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors({n: t.data for n, t in state.parameters.items()}))
    logger.info("checkpoint written: %s", path)
    return path


def load_checkpoint(path: Union[str, Path]) -> dict[str, np.ndarray]:
    return decode_tensors(Path(path).read_bytes())


def restore_checkpoint(state: ModelState, tensors: Mapping[str, np.ndarray]) -> ModelState:
    """Copy checkpoint values into a model built from the same spec."""
    expected = set(state.parameters)
    if set(tensors) != expected:
        missing = sorted(expected - set(tensors))
        extra = sorted(set(tensors) - expected)
        raise ContractError(f"checkpoint does not fit model: missing {missing}, extra {extra}")
    state.graph.restore(tensors)
    if state.uncertainty is not None:
        state.uncertainty.clamp()
    return state
