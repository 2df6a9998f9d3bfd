"""Finite-difference gradient suite over every operation, loss and variant.

Each check builds a tiny deterministic problem, registers its inputs as
parameters and compares the analytic gradient with central differences.
Feedback matrices and log-variances are drawn at random so that no check
sits on a ReLU or absolute-value kink.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.autodiff import ops
from src.autodiff.gradcheck import GradCheckResult, finite_difference_check
from src.autodiff.tensor import Graph, Tensor
from src.config.settings import EVAL_DEFAULTS
from src.mtl import losses
from src.mtl.models import ModelSpec, TaskKind, Variant, build, total_loss
from src.pipeline.dataset import Batch

logger = logging.getLogger(__name__)

Problem = tuple[Graph, Callable[[], Tensor]]

_N, _D, _H, _T, _K = 6, 3, 4, 2, 3
_TOY_REG = losses.RegularizerConfig(alpha=0.1, beta=0.5, lambda_l1=0.05)


@dataclass(frozen=True)
class GradientCheck:
    name: str
    group: str
    build: Callable[[np.random.Generator], Problem]


@dataclass
class CheckOutcome:
    name: str
    group: str
    result: GradCheckResult

    @property
    def passed(self) -> bool:
        return self.result.passed


def _param(graph: Graph, name: str, values: np.ndarray) -> Tensor:
    return graph.add_parameter(name, Tensor(values))


def _weighted_sum(out: Tensor, rng: np.random.Generator) -> Tensor:
    # random projection so every output coordinate gets a distinct gradient
    return (out * rng.normal(size=out.shape)).sum()


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    values = rng.uniform(0.2, 1.5, size=shape)
    return values * rng.choice([-1.0, 1.0], size=shape)


def _affine(rng: np.random.Generator) -> Problem:
    g = Graph()
    x = _param(g, "x", rng.normal(size=(_N, _D)))
    W = _param(g, "W", rng.normal(size=(_D, _H)))
    b = _param(g, "b", rng.normal(size=_H))
    proj = rng.normal(size=(_N, _H))
    return g, lambda: (ops.affine(x, W, b) * proj).sum()


def _relu(rng: np.random.Generator) -> Problem:
    g = Graph()
    x = _param(g, "x", _away_from_zero(rng, (_N, _H)))
    proj = rng.normal(size=(_N, _H))
    return g, lambda: (ops.relu(x) * proj).sum()


def _softmax(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    proj = rng.normal(size=(_N, _K))
    return g, lambda: (ops.softmax_rows(f) * proj).sum()


def _log_softmax(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    proj = rng.normal(size=(_N, _K))
    return g, lambda: (ops.log_softmax_rows(f) * proj).sum()


def _cross_entropy(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    labels = rng.integers(0, _K, size=_N)
    return g, lambda: ops.cross_entropy(f, labels)


def _concat(rng: np.random.Generator) -> Problem:
    g = Graph()
    a = _param(g, "a", rng.normal(size=(_N, 1)))
    b = _param(g, "b", rng.normal(size=(_N, 2)))
    proj = rng.normal(size=(_N, 3))
    return g, lambda: (ops.concat_columns([a, b]) * proj).sum()


def _tensor_algebra(rng: np.random.Generator) -> Problem:
    g = Graph()
    a = _param(g, "a", _away_from_zero(rng, (_N, _D)))
    b = _param(g, "b", rng.normal(size=(_D, _H)))
    c = _param(g, "c", rng.normal(size=_H))

    def loss() -> Tensor:
        h = (a @ b + c) * 0.5 - a.abs().mean(axis=1).reshape(_N, 1)
        return (h.square() / 3.0).mean() + (-(h[:, 1])).exp().sum() - a[2].sum()

    return g, loss


def _scaled_softmax(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    s = _param(g, "s", np.array(rng.uniform(-0.5, 0.5)))
    proj = rng.normal(size=(_N, _K))
    return g, lambda: (losses.scaled_softmax_likelihood(f, s) * proj).sum()


def _classification_data(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    labels = rng.integers(0, _K, size=_N).astype(np.float64)
    return g, lambda: losses.classification_data_loss(f, labels)


def _classification_uncertainty(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "logits", rng.normal(size=(_N, _K)))
    s = _param(g, "s", np.array(rng.uniform(-0.5, 0.5)))
    labels = rng.integers(0, _K, size=_N).astype(np.float64)
    return g, lambda: losses.classification_uncertainty_loss(f, labels, s)


def _regression_targets(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    y = rng.normal(size=_N)
    mask = np.ones(_N, dtype=bool)
    mask[1] = False
    y[1] = np.nan
    return y, mask


def _regression_data(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "predictions", rng.normal(size=_N))
    y, mask = _regression_targets(rng)
    return g, lambda: losses.regression_data_loss(f, y, mask)


def _regression_uncertainty(rng: np.random.Generator) -> Problem:
    g = Graph()
    f = _param(g, "predictions", rng.normal(size=_N))
    s = _param(g, "s", np.array(rng.uniform(-0.5, 0.5)))
    y, mask = _regression_targets(rng)
    return g, lambda: losses.regression_uncertainty_loss(f, y, s, mask)


def _l1(rng: np.random.Generator) -> Problem:
    g = Graph()
    W = _param(g, "W", _away_from_zero(rng, (_D, _H)))
    return g, lambda: losses.l1_penalty(W)


def _feedback(rng: np.random.Generator) -> Problem:
    g = Graph()
    Z = _param(g, "Z", rng.normal(size=(_N, _H)))
    O = _param(g, "O", _away_from_zero(rng, (_N, _T)))
    A = _param(g, "A", _away_from_zero(rng, (_T, _H)))
    weights = rng.uniform(0.1, 2.0, size=_T)
    return g, lambda: losses.asymmetric_feedback_regularizer(Z, O, A, weights, _TOY_REG)


def _toy_batch(rng: np.random.Generator, kind: TaskKind) -> Batch:
    x = rng.normal(size=(_N, _D))
    if kind is TaskKind.CLASSIFICATION:
        targets = rng.integers(0, _K, size=(_N, _T)).astype(np.float64)
    else:
        targets = rng.normal(size=(_N, _T))
    mask = np.ones((_N, _T), dtype=bool)
    mask[0, 1] = False
    targets[0, 1] = np.nan
    return Batch(x, targets, mask)


def _model_check(variant: Variant, kind: TaskKind) -> Callable[[np.random.Generator], Problem]:
    def problem(rng: np.random.Generator) -> Problem:
        spec = ModelSpec(
            input_dim=_D,
            hidden_dims=(_H,),
            task_count=_T,
            task_kind=kind,
            variant=variant,
            num_classes=_K,
            reg=_TOY_REG,
            seed=int(rng.integers(0, 2**31)),
        )
        model = build(spec)
        for name, tensor in model.parameters.items():
            if name.endswith(".b"):
                tensor.data[...] = rng.normal(scale=0.1, size=tensor.shape)
        if model.feedback is not None:
            model.feedback.data[...] = _away_from_zero(rng, model.feedback.shape)
        if model.uncertainty is not None:
            model.uncertainty.log_variance.data[...] = rng.uniform(-0.5, 0.5, size=_T)
        batch = _toy_batch(rng, kind)
        weights = None
        if variant.has_feedback:
            # weights are constants of the objective; freeze them at the starting point
            weights = rng.uniform(0.1, 2.0, size=_T)
        return model.graph, lambda: total_loss(model, batch, transfer_weights=weights).total

    return problem


def gradient_checks() -> list[GradientCheck]:
    """Every registered check, in execution order."""
    checks = [
        GradientCheck("affine", "ops", _affine),
        GradientCheck("relu", "ops", _relu),
        GradientCheck("softmax_rows", "ops", _softmax),
        GradientCheck("log_softmax_rows", "ops", _log_softmax),
        GradientCheck("cross_entropy", "ops", _cross_entropy),
        GradientCheck("concat_columns", "ops", _concat),
        GradientCheck("tensor_algebra", "ops", _tensor_algebra),
        GradientCheck("scaled_softmax_likelihood", "losses", _scaled_softmax),
        GradientCheck("classification_data_loss", "losses", _classification_data),
        GradientCheck("classification_uncertainty_loss", "losses", _classification_uncertainty),
        GradientCheck("regression_data_loss", "losses", _regression_data),
        GradientCheck("regression_uncertainty_loss", "losses", _regression_uncertainty),
        GradientCheck("l1_penalty", "losses", _l1),
        GradientCheck("asymmetric_feedback_regularizer", "losses", _feedback),
    ]
    for kind in TaskKind:
        for variant in Variant:
            checks.append(
                GradientCheck(
                    f"total_loss[{variant.value}/{kind.value}]", "models", _model_check(variant, kind)
                )
            )
    return checks


def run_gradient_suite(
    tolerance: float = EVAL_DEFAULTS["gradcheck_tolerance"],
    step: float = EVAL_DEFAULTS["gradcheck_step"],
    seed: int = 0,
) -> list[CheckOutcome]:
    """
    Run every gradient check.

    Args:
        tolerance: Largest accepted relative error
        step: Finite-difference half-width
        seed: Seed of the toy problems

    Returns:
        One outcome per check, in registry order
    """
    outcomes = []
    for index, check in enumerate(gradient_checks()):
        graph, loss_fn = check.build(np.random.default_rng([seed, index]))
        result = finite_difference_check(graph, loss_fn, tolerance, step)
        if not result.passed:
            logger.warning("gradient check %s failed: %s", check.name, result.describe())
        outcomes.append(CheckOutcome(check.name, check.group, result))
    return outcomes
