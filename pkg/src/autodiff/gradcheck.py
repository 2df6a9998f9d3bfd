"""Central finite-difference verification of analytic gradients."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.autodiff.tensor import Graph, Tensor
from src.config.settings import EVAL_DEFAULTS

# Relative errors are measured against max(|numeric|, _FLOOR) so that
# coordinates whose true gradient is ~0 are judged on absolute error.
_FLOOR = 1e-4


@dataclass
class GradCheckResult:
    """Outcome of a finite-difference check."""

    passed: bool
    worst_error: float
    worst_parameter: Optional[str]
    worst_index: Optional[tuple[int, ...]]
    analytic: Optional[float]
    numeric: Optional[float]
    checked: int
    tolerance: float

    def describe(self) -> str:
        if self.worst_parameter is None:
            return f"no parameters checked (vacuous pass, tolerance {self.tolerance:g})"
        return (
            f"worst relative error {self.worst_error:.3e} at "
            f"{self.worst_parameter}{list(self.worst_index or ())} "
            f"(analytic {self.analytic:.6e}, numeric {self.numeric:.6e}) "
            f"over {self.checked} coordinates"
        )


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(numeric), _FLOOR)


def finite_difference_check(
    graph: Graph,
    loss_fn: Callable[[], Tensor],
    tolerance: float = EVAL_DEFAULTS["gradcheck_tolerance"],
    step: float = EVAL_DEFAULTS["gradcheck_step"],
) -> GradCheckResult:
    """
    Compare analytic gradients with central differences, element by element.

    Args:
        graph: Graph whose parameters are perturbed in place
        loss_fn: Deterministic closure rebuilding the scalar loss from the
            current parameter values
        tolerance: Largest accepted relative error
        step: Finite-difference half-width

    Returns:
        GradCheckResult with the worst offending coordinate
    """
    graph.backward(loss_fn())
    analytic = {name: t.grad.copy() for name, t in graph.parameters.items()}

    worst = GradCheckResult(
        passed=True,
        worst_error=0.0,
        worst_parameter=None,
        worst_index=None,
        analytic=None,
        numeric=None,
        checked=0,
        tolerance=tolerance,
    )
    for name, tensor in graph.parameters.items():
        for index in np.ndindex(*tensor.shape):
            original = tensor.data[index]
            tensor.data[index] = original + step
            upper = loss_fn().item()
            tensor.data[index] = original - step
            lower = loss_fn().item()
            tensor.data[index] = original

            numeric = (upper - lower) / (2.0 * step)
            exact = float(analytic[name][index])
            error = relative_error(exact, numeric)
            worst.checked += 1
            if worst.worst_parameter is None or error > worst.worst_error:
                worst.worst_error = error
                worst.worst_parameter = name
                worst.worst_index = tuple(int(i) for i in index)
                worst.analytic = exact
                worst.numeric = numeric

    worst.passed = worst.worst_error < tolerance
    return worst
