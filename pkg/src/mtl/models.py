"""Model builders for the four method variants.

STL trains one independent stack per task. MTL shares a fully-connected
ReLU trunk producing the representation ``Z`` and adds an L1 penalty on the
shared weights. AMTFL and UAMTFL add a feedback matrix ``A`` that asks the
task outputs ``O`` to reconstruct ``Z``; the sparsity weight on each row of
``A`` is the task's loss (AMTFL) or its learned noise variance (UAMTFL).
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from src.autodiff.ops import affine, concat_columns, relu
from src.autodiff.tensor import Graph, Tensor
from src.errors import ConfigError, ContractError, DataError, DimensionError
from src.mtl import losses
from src.mtl.losses import S_MAX, RegularizerConfig, UncertaintyState
from src.pipeline.dataset import Batch


class Variant(str, Enum):
    STL = "STL"
    MTL = "MTL"
    AMTFL = "AMTFL"
    UAMTFL = "UAMTFL"

    @property
    def shares_features(self) -> bool:
        return self is not Variant.STL

    @property
    def has_feedback(self) -> bool:
        return self in (Variant.AMTFL, Variant.UAMTFL)


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


Layer = tuple[Tensor, Tensor]


@dataclass(frozen=True)
class ModelSpec:
    """Architecture, task layout and method variant of one model."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    task_count: int
    task_kind: TaskKind
    variant: Variant
    num_classes: int = 2
    reg: RegularizerConfig = field(default_factory=RegularizerConfig)
    seed: int = 0
    s_max: float = S_MAX

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        try:
            object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        except ValueError:
            raise ConfigError("task_kind", f"unknown task kind {self.task_kind!r}") from None
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            raise ConfigError("variant", f"unknown variant {self.variant!r}") from None

        if self.input_dim < 1:
            raise ConfigError("input_dim", f"must be >= 1, got {self.input_dim}")
        if self.task_count < 1:
            raise ConfigError("task_count", f"must be >= 1, got {self.task_count}")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden_dims", f"widths must be >= 1, got {list(self.hidden_dims)}")
        if self.variant.shares_features and not self.hidden_dims:
            raise ConfigError("hidden_dims", f"{self.variant.value} needs a shared hidden layer")
        if self.task_kind is TaskKind.CLASSIFICATION and self.num_classes < 2:
            raise ConfigError("num_classes", f"must be >= 2, got {self.num_classes}")
        if not self.s_max > 0:
            raise ConfigError("s_max", f"must be > 0, got {self.s_max}")

    @property
    def output_width(self) -> int:
        return self.num_classes if self.task_kind is TaskKind.CLASSIFICATION else 1

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, seed=seed)

    def with_variant(self, variant: Union[Variant, str]) -> "ModelSpec":
        return replace(self, variant=Variant(variant))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "task_count": self.task_count,
            "task_kind": self.task_kind.value,
            "variant": self.variant.value,
            "num_classes": self.num_classes,
            "reg": self.reg.to_dict(),
            "seed": self.seed,
            "s_max": self.s_max,
        }


@dataclass
class ModelState:
    """Parameters of a built model, registered on one graph."""

    spec: ModelSpec
    graph: Graph
    shared: list[Layer]
    towers: list[list[Layer]]
    heads: list[Layer]
    feedback: Optional[Tensor] = None
    uncertainty: Optional[UncertaintyState] = None

    @property
    def parameters(self) -> dict[str, Tensor]:
        return self.graph.parameters


@dataclass
class ForwardPass:
    """Outputs of one forward pass.

    ``Z`` is ``None`` for STL, which has no shared representation.
    ``outputs[t]`` is N×K logits for classification and a length-N vector
    for regression; ``O`` concatenates them column-wise.
    """

    Z: Optional[Tensor]
    O: Tensor
    outputs: list[Tensor]


@dataclass
class LossBreakdown:
    """Scalar training objective plus the detached per-task data losses."""

    total: Tensor
    data: Tensor
    regularizer: Optional[Tensor]
    per_task: np.ndarray
    skipped: tuple[int, ...]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _layer(graph: Graph, rng: np.random.Generator, prefix: str, fan_in: int, fan_out: int) -> Layer:
    W = graph.add_parameter(f"{prefix}.W", Tensor(_glorot(rng, fan_in, fan_out)))
    b = graph.add_parameter(f"{prefix}.b", Tensor(np.zeros(fan_out)))
    return W, b


def _stack(
    graph: Graph, rng: np.random.Generator, prefix: str, input_dim: int, widths: Sequence[int]
) -> list[Layer]:
    layers = []
    fan_in = input_dim
    for depth, width in enumerate(widths):
        layers.append(_layer(graph, rng, f"{prefix}.{depth}", fan_in, width))
        fan_in = width
    return layers


def build(spec: ModelSpec) -> ModelState:
    """
    Initialize a model for ``spec``.

    Weights are Glorot-uniform, biases and the feedback matrix start at zero,
    and every log-variance starts at zero. Initialization only depends on
    ``spec.seed``.

    Args:
        spec: Validated model specification

    Returns:
        ModelState with all parameters registered on a fresh Graph
    """
    rng = np.random.default_rng(spec.seed)
    graph = Graph()
    last_width = spec.hidden_dims[-1] if spec.hidden_dims else spec.input_dim

    shared: list[Layer] = []
    towers: list[list[Layer]] = []
    if spec.variant.shares_features:
        shared = _stack(graph, rng, "shared", spec.input_dim, spec.hidden_dims)
    else:
        towers = [
            _stack(graph, rng, f"task{t}.hidden", spec.input_dim, spec.hidden_dims)
            for t in range(spec.task_count)
        ]
    heads = [
        _layer(graph, rng, f"head.{t}", last_width, spec.output_width)
        for t in range(spec.task_count)
    ]

    feedback = None
    if spec.variant.has_feedback:
        feedback = graph.add_parameter(
            "feedback.A", Tensor(np.zeros((spec.task_count, last_width)))
        )

    uncertainty = None
    if spec.variant is Variant.UAMTFL:
        uncertainty = UncertaintyState.zeros(spec.task_count, trainable=True, s_max=spec.s_max)
        graph.add_parameter("uncertainty.s", uncertainty.log_variance)

    return ModelState(spec, graph, shared, towers, heads, feedback, uncertainty)


def _run_stack(h: Tensor, layers: Sequence[Layer]) -> Tensor:
    for W, b in layers:
        h = relu(affine(h, W, b))
    return h


def forward(m: ModelState, x: Union[Tensor, np.ndarray]) -> ForwardPass:
    """Compute the shared representation and every task output."""
    x = Tensor.lift(x)
    spec = m.spec
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise DimensionError(
            f"input shape {list(x.shape)} does not match input_dim {spec.input_dim}"
        )

    Z: Optional[Tensor] = None
    if spec.variant.shares_features:
        Z = _run_stack(x, m.shared)
        trunks = [Z] * spec.task_count
    else:
        trunks = [_run_stack(x, tower) for tower in m.towers]

    head_outputs = [affine(trunk, W, b) for trunk, (W, b) in zip(trunks, m.heads)]
    O = concat_columns(head_outputs)
    if spec.task_kind is TaskKind.REGRESSION:
        outputs = [out[:, 0] for out in head_outputs]
    else:
        outputs = head_outputs
    return ForwardPass(Z=Z, O=O, outputs=outputs)


def feedback_signal(fp: ForwardPass, spec: ModelSpec) -> Tensor:
    """One column per task for the feedback reconstruction, N×T.

    Regression tasks contribute their prediction. A K-class task contributes
    the centred score of its last class, ``f[:, K-1] - mean_k f[:, k]``,
    which is invariant to a constant logit shift.
    """
    if spec.task_kind is TaskKind.REGRESSION:
        return fp.O
    columns = []
    for logits in fp.outputs:
        centred = logits[:, spec.num_classes - 1] - logits.mean(axis=1)
        columns.append(centred.reshape(logits.shape[0], 1))
    return concat_columns(columns)


def _sum(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total


def total_loss(
    m: ModelState,
    batch: Batch,
    variant: Optional[Union[Variant, str]] = None,
    transfer_weights: Optional[np.ndarray] = None,
) -> LossBreakdown:
    """
    Assemble the training objective of ``variant`` on one batch.

    Args:
        m: Model state (built for a compatible variant)
        batch: Features, N×T targets and N×T validity mask
        variant: Objective to assemble; defaults to the model's own variant
        transfer_weights: Fixed feedback sparsity weights replacing the
            loss- or uncertainty-derived ones

    Returns:
        LossBreakdown with the scalar objective and detached per-task losses
        (NaN for tasks without valid samples in this batch)
    """
    spec = m.spec
    variant = spec.variant if variant is None else Variant(variant)
    if variant.shares_features != spec.variant.shares_features:
        raise ContractError(f"{variant.value} objective on a {spec.variant.value} model")
    if variant.has_feedback and m.feedback is None:
        raise ContractError(f"{variant.value} objective needs a feedback matrix")
    if variant is Variant.UAMTFL and m.uncertainty is None:
        raise ContractError("UAMTFL objective needs an uncertainty state")
    if batch.targets.shape != (batch.x.shape[0], spec.task_count):
        raise DimensionError(
            f"targets shape {list(batch.targets.shape)} does not match "
            f"{batch.x.shape[0]} samples × {spec.task_count} tasks"
        )

    fp = forward(m, batch.x)
    classification = spec.task_kind is TaskKind.CLASSIFICATION
    use_uncertainty = variant is Variant.UAMTFL and spec.reg.uncertainty_in_data_loss

    per_task = np.full(spec.task_count, np.nan)
    plain_terms: list[Tensor] = []
    weighted_terms: list[Tensor] = []
    active: list[int] = []
    for t in range(spec.task_count):
        valid = batch.mask[:, t]
        if classification:
            rows = np.flatnonzero(valid)
            if rows.size == 0:
                continue
            logits = fp.outputs[t] if rows.size == valid.size else fp.outputs[t][rows]
            labels = batch.targets[rows, t]
            plain = losses.classification_data_loss(logits, labels, t)
            if use_uncertainty:
                weighted_terms.append(
                    losses.classification_uncertainty_loss(
                        logits, labels, m.uncertainty.task(t), t
                    )
                )
        else:
            plain = losses.regression_data_loss(fp.outputs[t], batch.targets[:, t], valid)
            if plain is None:
                continue
            if use_uncertainty:
                weighted_terms.append(
                    losses.regression_uncertainty_loss(
                        fp.outputs[t], batch.targets[:, t], m.uncertainty.task(t), valid
                    )
                )
        per_task[t] = plain.item()
        plain_terms.append(plain)
        active.append(t)

    if not active:
        raise DataError("batch holds no valid target for any task")

    data = _sum(weighted_terms if use_uncertainty else plain_terms) / len(active)
    if variant is Variant.UAMTFL and not use_uncertainty:
        # s is still fitted, against detached losses, so the transfer weights stay informative
        calibration = [
            (-m.uncertainty.task(t)).exp() * float(per_task[t]) + m.uncertainty.task(t) * 0.5
            for t in active
        ]
        data = data + _sum(calibration) / len(active)

    total = data
    regularizer: Optional[Tensor] = None
    if variant.shares_features:
        shared_l1 = _sum([losses.l1_penalty(W) for W, _ in m.shared])
        regularizer = shared_l1 * spec.reg.lambda_l1

    if variant.has_feedback:
        if transfer_weights is not None:
            weights = np.asarray(transfer_weights, dtype=np.float64)
        elif variant is Variant.UAMTFL and spec.reg.uncertainty_in_transfer:
            weights = losses.transfer_weights_from_uncertainty(m.uncertainty)
        else:
            observed = per_task[~np.isnan(per_task)]
            # tasks absent from this batch are treated as the least reliable
            weights = losses.transfer_weights_from_loss(
                np.where(np.isnan(per_task), observed.max(), per_task)
            )
        feedback = losses.asymmetric_feedback_regularizer(
            fp.Z, feedback_signal(fp, spec), m.feedback, weights, spec.reg
        )
        regularizer = regularizer + feedback

    if regularizer is not None:
        total = total + regularizer

    skipped = tuple(t for t in range(spec.task_count) if t not in active)
    return LossBreakdown(total, data, regularizer, per_task, skipped)


def predict(m: ModelState, x: np.ndarray) -> list[np.ndarray]:
    """Raw per-task outputs (logits or predictions) as arrays."""
    return [out.numpy() for out in forward(m, x).outputs]


def predict_probabilities(m: ModelState, x: np.ndarray) -> list[np.ndarray]:
    """Class probabilities per task; σ-scaled for UAMTFL models."""
    if m.spec.task_kind is not TaskKind.CLASSIFICATION:
        raise ContractError("probabilities are only defined for classification tasks")
    fp = forward(m, x)
    result = []
    for t, logits in enumerate(fp.outputs):
        s_t = 0.0 if m.uncertainty is None else float(m.uncertainty.log_variance.data[t])
        result.append(losses.scaled_softmax_likelihood(logits, s_t, t).numpy())
    return result
