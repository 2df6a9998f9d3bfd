"""Unit tests for expression preprocessing."""

import numpy as np
import pytest

from src.errors import DataError, DimensionError
from src.pipeline.cleaner import ExpressionCleaner, preprocess_expression, standardize


@pytest.fixture
def counts():
    """Raw count matrix, 30 samples × 8 genes."""
    rng = np.random.default_rng(1)
    return rng.poisson(lam=rng.uniform(1, 50, size=8), size=(30, 8)).astype(float) + 1.0


class TestStandardize:
    """Test suite for column standardization."""

    def test_zero_mean_unit_variance(self, counts):
        """Test mean 0 and population variance 1 per column."""
        out, constant = standardize(counts)
        assert constant == []
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-9)

    def test_idempotent(self, counts):
        """Test that standardizing twice changes nothing."""
        once, _ = standardize(counts)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice, once, atol=1e-9)

    def test_scale_and_shift_invariant(self, counts):
        """Test that affine column transforms give the same result."""
        base, _ = standardize(counts)
        moved, _ = standardize(counts * 7.5 + 100.0)
        np.testing.assert_allclose(moved, base, atol=1e-9)

    def test_matches_population_z_score(self, counts):
        """Test agreement with (x − mean) / population std per column."""
        out, _ = standardize(counts)
        expected = (counts - counts.mean(axis=0)) / counts.std(axis=0)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_read_only_input_untouched(self, counts):
        """Test that a frozen input array is neither written nor required to be writable."""
        frozen = counts.copy()
        frozen.setflags(write=False)
        out, _ = standardize(frozen)
        np.testing.assert_array_equal(frozen, counts)
        assert out.flags.writeable

    def test_constant_column_zeroed(self):
        """Test that a constant column becomes zeros and is reported."""
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        out, constant = standardize(X)
        assert constant == [1]
        np.testing.assert_array_equal(out[:, 1], 0.0)


class TestExpressionCleaner:
    """Test suite for ExpressionCleaner."""

    def test_library_sizes_equalized(self, counts):
        """Test that every corrected sample sums to the median size."""
        corrected, sizes, target = ExpressionCleaner().correct_library_size(counts)
        assert target == pytest.approx(np.median(counts.sum(axis=1)))
        np.testing.assert_allclose(corrected.sum(axis=1), target)
        np.testing.assert_array_equal(sizes, counts.sum(axis=1))

    def test_sample_scaling_is_removed(self, counts):
        """Test that doubling one sample's depth leaves its profile unchanged."""
        scaled = counts.copy()
        scaled[0] *= 2.0
        a, _, target_a = ExpressionCleaner().correct_library_size(counts)
        b, _, target_b = ExpressionCleaner().correct_library_size(scaled)
        np.testing.assert_allclose(a[0] / target_a, b[0] / target_b)

    def test_preprocess_log(self, counts):
        """Test the recorded steps and standardized output."""
        result = ExpressionCleaner().preprocess(counts)
        assert result.cleaned.shape == counts.shape
        assert any("log(1 + x)" in line for line in result.cleaning_log)
        np.testing.assert_allclose(result.cleaned.std(axis=0), 1.0, atol=1e-9)

    def test_negative_count_names_sample(self):
        """Test that negative counts are rejected with the sample name."""
        with pytest.raises(DataError, match="'s2'"):
            ExpressionCleaner().correct_library_size(
                np.array([[1.0, 2.0], [-1.0, 3.0]]), sample_ids=["s1", "s2"]
            )

    def test_empty_sample(self):
        """Test that a sample without counts is rejected."""
        with pytest.raises(DataError, match="no counts"):
            preprocess_expression(np.array([[1.0, 2.0], [0.0, 0.0]]))

    def test_needs_matrix(self):
        """Test that a vector is not an expression matrix."""
        with pytest.raises(DimensionError):
            preprocess_expression(np.ones(4))
