"""Neural-network operations with analytic backward passes."""

from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from src.autodiff.tensor import Tensor
from src.errors import ContractError, DimensionError


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Compute ``x @ W + b`` for a batch ``x`` of shape N×D."""
    if x.ndim != 2 or W.ndim != 2 or b.ndim != 1:
        raise DimensionError(
            f"affine: expected x[N×D], W[D×H], b[H], got x {list(x.shape)}, "
            f"W {list(W.shape)}, b {list(b.shape)}"
        )
    if x.shape[1] != W.shape[0]:
        raise DimensionError(
            f"affine: x shape {list(x.shape)} incompatible with W shape {list(W.shape)}"
        )
    if W.shape[1] != b.shape[0]:
        raise DimensionError(
            f"affine: W shape {list(W.shape)} incompatible with b shape {list(b.shape)}"
        )
    xd, Wd = x.data, W.data

    def backward(g: np.ndarray):
        return g @ Wd.T, xd.T @ g, g.sum(axis=0)

    return Tensor.from_op(xd @ Wd + b.data, (x, W, b), backward, "affine")


def relu(x: Tensor) -> Tensor:
    """Elementwise ``max(0, x)``; the subgradient at 0 is 0."""
    active = x.data > 0

    def backward(g: np.ndarray):
        return (g * active,)

    return Tensor.from_op(np.where(active, x.data, 0.0), (x,), backward, "relu")


def _require_rows(op: str, logits: Tensor) -> None:
    if logits.ndim != 2:
        raise DimensionError(f"{op}: expected N×K logits, got shape {list(logits.shape)}")


def softmax_rows(logits: Tensor) -> Tensor:
    """Row-wise softmax."""
    _require_rows("softmax_rows", logits)
    probs = softmax(logits.data, axis=1)

    def backward(g: np.ndarray):
        return (probs * (g - (g * probs).sum(axis=1, keepdims=True)),)

    return Tensor.from_op(probs, (logits,), backward, "softmax_rows")


def log_softmax_rows(logits: Tensor) -> Tensor:
    _require_rows("log_softmax_rows", logits)
    out = logits.data - logsumexp(logits.data, axis=1, keepdims=True)
    probs = np.exp(out)

    def backward(g: np.ndarray):
        return (g - probs * g.sum(axis=1, keepdims=True),)

    return Tensor.from_op(out, (logits,), backward, "log_softmax_rows")


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of N×K logits against integer labels.

    Labels are assumed validated by the caller.
    """
    _require_rows("cross_entropy", logits)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if n == 0:
        raise ContractError("cross_entropy over an empty batch")
    if labels.shape != (n,):
        raise DimensionError(
            f"cross_entropy: logits {list(logits.shape)} vs labels {list(labels.shape)}"
        )
    log_probs = logits.data - logsumexp(logits.data, axis=1, keepdims=True)
    rows = np.arange(n)
    value = -log_probs[rows, labels].mean()

    def backward(g: np.ndarray):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (grad * (float(g) / n),)

    return Tensor.from_op(value, (logits,), backward, "cross_entropy")


def concat_columns(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate N×k_i tensors into one N×(Σk_i) tensor."""
    if not tensors:
        raise ContractError("concat_columns needs at least one tensor")
    rows = {t.shape[0] for t in tensors if t.ndim == 2}
    if len(rows) != 1 or any(t.ndim != 2 for t in tensors):
        raise DimensionError(
            f"concat_columns: incompatible shapes {[list(t.shape) for t in tensors]}"
        )
    widths = [t.shape[1] for t in tensors]
    bounds = np.cumsum(widths)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=1))

    return Tensor.from_op(
        np.concatenate([t.data for t in tensors], axis=1), tuple(tensors), backward, "concat"
    )
