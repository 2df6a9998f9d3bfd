"""Unit tests for binary checkpoints."""

import numpy as np
import pytest

from src.errors import ContractError, FormatError
from src.mtl.checkpoint import (
    MAGIC,
    decode_tensors,
    encode_tensors,
    load_checkpoint,
    restore_checkpoint,
    save_checkpoint,
)
from src.mtl.models import build


class TestCheckpoint:
    """Test suite for checkpoint encoding and restore."""

    def test_save_load_restore(self, tmp_path, regression_data, spec_factory):
        """Test that a restored model matches the saved one exactly."""
        spec = spec_factory(regression_data, "UAMTFL", seed=1)
        saved = build(spec)
        saved.uncertainty.log_variance.data[...] = [0.5, -1.5]
        path = save_checkpoint(saved, tmp_path / "run" / "checkpoint.bin")
        assert path.read_bytes().startswith(MAGIC)

        fresh = restore_checkpoint(build(spec.with_seed(9)), load_checkpoint(path))
        for name, tensor in saved.parameters.items():
            np.testing.assert_array_equal(fresh.parameters[name].data, tensor.data)

    def test_scalar_and_empty_tensors(self):
        """Test rank-0 and zero-size tensors survive encoding."""
        tensors = {"scalar": np.array(2.5), "empty": np.zeros((0, 3))}
        decoded = decode_tensors(encode_tensors(tensors))
        assert decoded["scalar"].shape == ()
        assert decoded["scalar"] == 2.5
        assert decoded["empty"].shape == (0, 3)

    def test_bad_magic(self):
        """Test that foreign bytes are rejected."""
        with pytest.raises(FormatError, match="magic"):
            decode_tensors(b"NOTACKPT" + b"\x00" * 8)

    def test_truncated_payload(self):
        """Test that a cut-off file reports the offset."""
        payload = encode_tensors({"w": np.ones((2, 2))})
        with pytest.raises(FormatError, match="truncated"):
            decode_tensors(payload[:-3])

    def test_trailing_bytes(self):
        """Test that extra bytes after the last tensor are rejected."""
        payload = encode_tensors({"w": np.ones(2)})
        with pytest.raises(FormatError, match="trailing"):
            decode_tensors(payload + b"\x00")

    def test_restore_rejects_foreign_model(self, regression_data, spec_factory):
        """Test that a checkpoint of another variant does not fit."""
        stl = build(spec_factory(regression_data, "STL"))
        mtl = build(spec_factory(regression_data, "MTL"))
        tensors = {n: t.data for n, t in stl.parameters.items()}
        with pytest.raises(ContractError, match="missing"):
            restore_checkpoint(mtl, tensors)
