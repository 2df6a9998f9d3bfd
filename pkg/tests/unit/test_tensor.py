"""Unit tests for the autodiff tensor, graph and operations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.autodiff import ops
from src.autodiff.tensor import Graph, Tensor, backward, unbroadcast
from src.errors import ContractError, DimensionError, NumericError


class TestTensor:
    """Test suite for Tensor arithmetic and the reverse sweep."""

    def test_add_broadcasts_and_unbroadcasts_gradient(self):
        """Test that a broadcast bias receives the column sums."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones((3, 2))))
        b = g.add_parameter("b", Tensor(np.array([1.0, 2.0])))
        grads = g.backward((x + b).sum())
        np.testing.assert_array_equal(grads["b"], [3.0, 3.0])
        np.testing.assert_array_equal(grads["x"], np.ones((3, 2)))

    def test_incompatible_shapes_raise_dimension_error(self):
        """Test that non-broadcastable operands name both shapes."""
        with pytest.raises(DimensionError, match=r"\[2, 3\].*\[4\]"):
            Tensor(np.zeros((2, 3))) + Tensor(np.zeros(4))

    def test_matmul_gradient(self):
        """Test the matrix product gradient on a known case."""
        g = Graph()
        a = g.add_parameter("a", Tensor(np.array([[1.0, 2.0]])))
        b = g.add_parameter("b", Tensor(np.array([[3.0], [4.0]])))
        grads = g.backward((a @ b).sum())
        np.testing.assert_array_equal(grads["a"], [[3.0, 4.0]])
        np.testing.assert_array_equal(grads["b"], [[1.0], [2.0]])

    def test_matmul_shape_mismatch(self):
        """Test that a bad inner dimension is rejected."""
        with pytest.raises(DimensionError):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))

    def test_shared_subexpression_accumulates(self):
        """Test that a node used twice receives both contributions."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.array(3.0)))
        y = x * x + x
        grads = g.backward(y)
        assert grads["x"] == pytest.approx(7.0)

    def test_index_gradient_scatters(self):
        """Test that repeated indexing adds into the same slot."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.arange(4.0)))
        grads = g.backward(x[np.array([1, 1, 3])].sum())
        np.testing.assert_array_equal(grads["x"], [0.0, 2.0, 0.0, 1.0])

    def test_abs_subgradient_is_zero_at_zero(self):
        """Test the convention sign(0) = 0."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.array([-2.0, 0.0, 5.0])))
        grads = g.backward(x.abs().sum())
        np.testing.assert_array_equal(grads["x"], [-1.0, 0.0, 1.0])

    def test_non_finite_value_raises(self):
        """Test that overflow is reported instead of propagated."""
        with pytest.raises(NumericError, match="exp"):
            Tensor(np.array([1000.0])).exp()

    def test_non_scalar_loss_rejected(self):
        """Test that backward needs a scalar."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones(3)))
        with pytest.raises(ContractError):
            g.backward(x * 2.0)

    def test_unreached_parameter_gets_zero_gradient(self):
        """Test that parameters outside the loss graph get zeros."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones(2)))
        g.add_parameter("unused", Tensor(np.ones(3)))
        grads = backward(g, x.sum())
        np.testing.assert_array_equal(grads["unused"], np.zeros(3))

    def test_duplicate_parameter_name(self):
        """Test that a name can only be registered once."""
        g = Graph()
        g.add_parameter("w", Tensor(np.ones(1)))
        with pytest.raises(ContractError):
            g.add_parameter("w", Tensor(np.ones(1)))

    def test_constant_times_tensor_from_numpy_side(self):
        """Test that ndarray * Tensor defers to the tensor."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones(2)))
        out = np.array([2.0, 3.0]) * x
        assert isinstance(out, Tensor)
        np.testing.assert_array_equal(g.backward(out.sum())["x"], [2.0, 3.0])

    def test_topological_order_puts_inputs_first(self):
        """Test that every node appears after its parents."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones(2)))
        loss = ((x * 2.0).exp() + x).sum()
        order = Graph.topological_order(loss)
        assert order[-1] is loss
        assert order.index(x) < len(order) - 1

    def test_deep_chain_does_not_recurse(self):
        """Test that a long chain is handled by the iterative sweep."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.array(1.0)))
        y = x
        for _ in range(5000):
            y = y + 0.0
        assert g.backward(y)["x"] == pytest.approx(1.0)

    def test_snapshot_and_restore(self):
        """Test that restore writes values back in place."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.ones(2)))
        saved = g.snapshot()
        x.data += 5.0
        g.restore(saved)
        np.testing.assert_array_equal(x.data, np.ones(2))

    def test_unbroadcast_reduces_leading_and_unit_axes(self):
        """Test reduction back to broadcast source shapes."""
        grad = np.ones((4, 3, 2))
        assert unbroadcast(grad, (3, 1)).shape == (3, 1)
        np.testing.assert_array_equal(unbroadcast(grad, (3, 1)), np.full((3, 1), 8.0))


class TestOps:
    """Test suite for neural-network operations."""

    def test_affine_dimension_error_names_shapes(self):
        """Test that affine reports both incompatible shapes."""
        x = Tensor(np.zeros((2, 3)))
        W = Tensor(np.zeros((4, 5)))
        b = Tensor(np.zeros(5))
        with pytest.raises(DimensionError, match=r"\[2, 3\].*\[4, 5\]"):
            ops.affine(x, W, b)

    def test_relu_subgradient_zero_at_zero(self):
        """Test relu'(0) = 0."""
        g = Graph()
        x = g.add_parameter("x", Tensor(np.array([-1.0, 0.0, 2.0])))
        grads = g.backward(ops.relu(x).sum())
        np.testing.assert_array_equal(grads["x"], [0.0, 0.0, 1.0])

    def test_softmax_of_uniform_logits(self):
        """Test that equal logits give a uniform distribution."""
        out = ops.softmax_rows(Tensor(np.zeros((2, 4)))).numpy()
        np.testing.assert_allclose(out, np.full((2, 4), 0.25))

    def test_softmax_survives_large_logits(self):
        """Test numerical stability for logits around 1000."""
        out = ops.softmax_rows(Tensor(np.array([[1000.0, 1001.0]]))).numpy()
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out.sum(), 1.0)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, (3, 5), elements=st.floats(-50, 50)))
    def test_softmax_rows_sum_to_one(self, logits):
        """Test that every softmax row is a probability vector."""
        out = ops.softmax_rows(Tensor(logits)).numpy()
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=1), np.ones(3), atol=1e-12)

    def test_log_softmax_matches_log_of_softmax(self, rng):
        """Test consistency of the two softmax forms."""
        logits = rng.normal(size=(4, 3))
        np.testing.assert_allclose(
            ops.log_softmax_rows(Tensor(logits)).numpy(),
            np.log(ops.softmax_rows(Tensor(logits)).numpy()),
            atol=1e-12,
        )

    def test_cross_entropy_of_uniform_logits(self):
        """Test CE = log K for uniform predictions."""
        value = ops.cross_entropy(Tensor(np.zeros((5, 4))), np.array([0, 1, 2, 3, 0])).item()
        assert value == pytest.approx(np.log(4.0))

    def test_cross_entropy_rejects_empty_batch(self):
        """Test that CE needs at least one sample."""
        with pytest.raises(ContractError):
            ops.cross_entropy(Tensor(np.zeros((0, 2))), np.zeros(0, dtype=np.int64))

    def test_concat_columns_splits_gradient(self):
        """Test that concatenation routes gradients back per block."""
        g = Graph()
        a = g.add_parameter("a", Tensor(np.ones((2, 1))))
        b = g.add_parameter("b", Tensor(np.ones((2, 2))))
        weights = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        grads = g.backward((ops.concat_columns([a, b]) * weights).sum())
        np.testing.assert_array_equal(grads["a"], [[1.0], [4.0]])
        np.testing.assert_array_equal(grads["b"], [[2.0, 3.0], [5.0, 6.0]])

    def test_concat_columns_row_mismatch(self):
        """Test that blocks need the same number of rows."""
        with pytest.raises(DimensionError):
            ops.concat_columns([Tensor(np.ones((2, 1))), Tensor(np.ones((3, 1)))])
