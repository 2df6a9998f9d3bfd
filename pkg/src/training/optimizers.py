"""Gradient-descent optimizers over named parameter tensors."""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from src.autodiff.tensor import Tensor
from src.config.settings import TRAIN_DEFAULTS
from src.errors import ConfigError, DimensionError


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = TRAIN_DEFAULTS["beta1"],
    beta2: float = TRAIN_DEFAULTS["beta2"],
    eps: float = TRAIN_DEFAULTS["eps"],
) -> AdamState:
    """
    One bias-corrected adaptive-moment update, applied in place.

    Args:
        params: Parameter arrays, updated in place
        grads: Gradients with the same names and shapes
        state: Moment estimates, created lazily per parameter
        lr: Step size
        beta1: Decay of the first moment
        beta2: Decay of the second moment
        eps: Denominator offset

    Returns:
        The updated state
    """
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise DimensionError(
                f"gradient of {name} has shape {list(g.shape)}, parameter {list(value.shape)}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m, v = state.m[name], state.v[name]
        if m.shape != value.shape:
            raise DimensionError(f"optimizer state for {name} does not match its shape")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        value -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


class Adam:
    """Adaptive-moment optimizer bound to a set of parameters."""

    def __init__(
        self,
        parameters: Mapping[str, Tensor],
        lr: float = TRAIN_DEFAULTS["learning_rate"],
        beta1: float = TRAIN_DEFAULTS["beta1"],
        beta2: float = TRAIN_DEFAULTS["beta2"],
        eps: float = TRAIN_DEFAULTS["eps"],
    ):
        self.parameters = dict(parameters)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self) -> None:
        adam_step(
            {name: p.data for name, p in self.parameters.items()},
            {name: p.grad for name, p in self.parameters.items()},
            self.state,
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
        )


class SGD:
    """Plain gradient descent."""

    def __init__(self, parameters: Mapping[str, Tensor], lr: float):
        self.parameters = dict(parameters)
        self.lr = lr

    def step(self) -> None:
        for p in self.parameters.values():
            p.data -= self.lr * p.grad


def make_optimizer(
    name: str,
    parameters: Mapping[str, Tensor],
    lr: float,
    beta1: float = TRAIN_DEFAULTS["beta1"],
    beta2: float = TRAIN_DEFAULTS["beta2"],
    eps: float = TRAIN_DEFAULTS["eps"],
):
    if name == "adam":
        return Adam(parameters, lr, beta1, beta2, eps)
    if name == "sgd":
        return SGD(parameters, lr)
    raise ConfigError("optimizer", f"unknown optimizer {name!r} (expected 'adam' or 'sgd')")
