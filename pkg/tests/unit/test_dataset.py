"""Unit tests for TaskDataset and splitting."""

import numpy as np
import pytest

from src.errors import ContractError, DimensionError
from src.pipeline.dataset import LabeledImages, TaskDataset, train_test_split


class TestTaskDataset:
    """Test suite for TaskDataset."""

    def test_arrays_are_read_only(self, regression_data):
        """Test that stored arrays cannot be modified in place."""
        with pytest.raises(ValueError):
            regression_data.X[0, 0] = 1.0

    def test_masked_cells_may_hold_nan(self, regression_data):
        """Test that NaN is accepted where the mask is False."""
        assert np.isnan(regression_data.targets[3, 1])
        assert not regression_data.mask[3, 1]

    def test_nan_in_valid_cell_rejected(self):
        """Test that valid targets must be finite."""
        with pytest.raises(ContractError):
            TaskDataset(X=np.zeros((2, 1)), targets=[[np.nan], [0.0]], mask=[[True], [True]])

    def test_mask_shape_checked(self):
        """Test that the mask must match the targets."""
        with pytest.raises(DimensionError, match="mask"):
            TaskDataset(X=np.zeros((2, 1)), targets=np.zeros((2, 2)), mask=np.ones((2, 1)))

    def test_target_rows_checked(self):
        """Test that targets need one row per sample."""
        with pytest.raises(DimensionError):
            TaskDataset(X=np.zeros((3, 1)), targets=np.zeros((2, 2)), mask=np.ones((2, 2)))

    def test_default_names(self, regression_data):
        """Test generated task names and sample identifiers."""
        assert regression_data.task_names == ("task0", "task1")
        assert regression_data.sample_ids[:2] == ("0", "1")
        assert (regression_data.n_samples, regression_data.n_features) == (40, 5)

    def test_batch_rows(self, regression_data):
        """Test row selection for minibatches."""
        batch = regression_data.batch([1, 3])
        assert batch.x.shape == (2, 5)
        assert not batch.mask[1, 1]

    def test_subset_records_rows(self, regression_data):
        """Test that subsets keep their source rows in the provenance."""
        part = regression_data.subset([4, 2], "test")
        assert part.split == "test"
        assert part.provenance["rows"] == [4, 2]
        assert part.sample_ids == ("4", "2")


class TestTrainTestSplit:
    """Test suite for train_test_split."""

    def test_partition_is_disjoint_and_complete(self, regression_data):
        """Test that every row lands in exactly one split."""
        split = train_test_split(regression_data, 0.25, seed=0)
        train_ids, test_ids = set(split.train.sample_ids), set(split.test.sample_ids)
        assert len(test_ids) == 10
        assert train_ids.isdisjoint(test_ids)
        assert train_ids | test_ids == set(regression_data.sample_ids)
        assert (split.train.split, split.test.split) == ("train", "test")

    def test_seeded(self, regression_data):
        """Test that the same seed gives the same split."""
        a = train_test_split(regression_data, 0.25, seed=5)
        b = train_test_split(regression_data, 0.25, seed=5)
        assert a.test.sample_ids == b.test.sample_ids

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 0.001])
    def test_bad_fraction(self, regression_data, fraction):
        """Test that degenerate splits are rejected."""
        with pytest.raises(ContractError):
            train_test_split(regression_data, fraction, seed=0)


class TestLabeledImages:
    """Test suite for LabeledImages."""

    def test_flat(self):
        """Test flattening images to rows."""
        images = LabeledImages(images=np.zeros((3, 2, 2)), labels=np.array([0, 1, 2]))
        assert images.flat().shape == (3, 4)
        assert len(images) == 3

    def test_count_mismatch(self):
        """Test that images and labels must pair up."""
        with pytest.raises(DimensionError):
            LabeledImages(images=np.zeros((3, 2, 2)), labels=np.array([0, 1]))
