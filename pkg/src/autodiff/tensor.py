"""Dense tensors with define-by-run reverse-mode differentiation.

Every arithmetic operation on a :class:`Tensor` that requires gradients
records its parents and a backward closure. :class:`Graph` owns the
trainable leaves and runs the reverse sweep over whatever graph the last
forward pass produced; nothing is compiled or cached between passes.
"""

from __future__ import annotations

from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from src.errors import ContractError, DimensionError, NumericError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Tensor", np.ndarray, float, int]


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(
            f"{op}: shapes {list(a.shape)} and {list(b.shape)} do not broadcast"
        ) from exc


class Tensor:
    """A float64 array with an optional gradient slot."""

    # numpy defers to the reflected Tensor operators (ndarray * Tensor -> Tensor)
    __array_ufunc__ = None

    def __init__(
        self,
        data: Union[np.ndarray, float, int, Sequence],
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        array = np.array(data, dtype=np.float64)
        _check_finite(array, name or "leaf")
        self.data = array
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        """Create the output node of an operation.

        ``backward`` maps the output gradient to one gradient (or ``None``)
        per parent. The node is only wired into the graph when at least one
        parent requires gradients.
        """
        out = cls.__new__(cls)
        array = np.array(data, dtype=np.float64)
        _check_finite(array, op)
        out.data = array
        out.requires_grad = any(p.requires_grad for p in parents)
        out.name = None
        out.grad = None
        out.op = op
        out._parents = tuple(parents) if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        return out

    @staticmethod
    def lift(value: Operand) -> "Tensor":
        """Wrap a constant so it can take part in an operation."""
        return value if isinstance(value, Tensor) else Tensor(value)

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, shape is {list(self.shape)}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Tensor({label}, shape={list(self.shape)}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic ----------------------------------------

    def __add__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        _broadcast_shape("add", self.data, other.data)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray):
            return unbroadcast(g, a_shape), unbroadcast(g, b_shape)

        return Tensor.from_op(self.data + other.data, (self, other), backward, "add")

    def __radd__(self, other: Operand) -> "Tensor":
        return Tensor.lift(other) + self

    def __sub__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        _broadcast_shape("sub", self.data, other.data)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray):
            return unbroadcast(g, a_shape), unbroadcast(-g, b_shape)

        return Tensor.from_op(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other: Operand) -> "Tensor":
        return Tensor.lift(other) - self

    def __mul__(self, other: Operand) -> "Tensor":
        other = Tensor.lift(other)
        _broadcast_shape("mul", self.data, other.data)
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)

        return Tensor.from_op(a * b, (self, other), backward, "mul")

    def __rmul__(self, other: Operand) -> "Tensor":
        return Tensor.lift(other) * self

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __truediv__(self, other: Union[float, int]) -> "Tensor":
        if isinstance(other, Tensor):
            raise ContractError("division is only defined by a constant scalar")
        scale = 1.0 / float(other)
        return self * scale

    def __matmul__(self, other: "Tensor") -> "Tensor":
        other = Tensor.lift(other)
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise DimensionError(
                f"matmul: shapes {list(self.shape)} and {list(other.shape)} do not agree"
            )
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return g @ b.T, a.T @ g

        return Tensor.from_op(a @ b, (self, other), backward, "matmul")

    # -- reductions and unary maps -------------------------------------

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        shape = self.shape

        def backward(g: np.ndarray):
            if axis is None:
                return (np.full(shape, float(g)),)
            return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

        return Tensor.from_op(self.data.sum(axis=axis), (self,), backward, "sum")

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        count = self.size if axis is None else self.shape[axis]
        if count == 0:
            raise ContractError("mean over an empty axis")
        return self.sum(axis=axis) / count

    def exp(self) -> "Tensor":
        with np.errstate(over="ignore"):
            out = np.exp(self.data)

        def backward(g: np.ndarray):
            return (g * out,)

        return Tensor.from_op(out, (self,), backward, "exp")

    def abs(self) -> "Tensor":
        sign = np.sign(self.data)
        return Tensor.from_op(np.abs(self.data), (self,), lambda g: (g * sign,), "abs")

    def square(self) -> "Tensor":
        a = self.data
        return Tensor.from_op(a * a, (self,), lambda g: (2.0 * a * g,), "square")

    def reshape(self, *shape: int) -> "Tensor":
        original = self.shape
        try:
            out = self.data.reshape(shape)
        except ValueError as exc:
            raise DimensionError(
                f"reshape: cannot view {list(original)} as {list(shape)}"
            ) from exc
        return Tensor.from_op(out, (self,), lambda g: (g.reshape(original),), "reshape")

    def __getitem__(self, key) -> "Tensor":
        shape = self.shape

        def backward(g: np.ndarray):
            full = np.zeros(shape)
            np.add.at(full, key, g)
            return (full,)

        return Tensor.from_op(self.data[key], (self,), backward, "index")


class Graph:
    """Registry of trainable leaves plus the reverse sweep.

    The graph itself is rebuilt by every forward pass; ``nodes`` holds the
    topological order seen by the most recent :meth:`backward`.
    """

    def __init__(self, parameters: Optional[Mapping[str, Tensor]] = None):
        self.parameters: dict[str, Tensor] = {}
        self.nodes: list[Tensor] = []
        for name, tensor in (parameters or {}).items():
            self.add_parameter(name, tensor)

    def add_parameter(self, name: str, tensor: Tensor) -> Tensor:
        if name in self.parameters:
            raise ContractError(f"parameter {name!r} registered twice")
        tensor.requires_grad = True
        tensor.name = name
        self.parameters[name] = tensor
        return tensor

    def zero_grad(self) -> None:
        for tensor in self.parameters.values():
            tensor.grad = np.zeros_like(tensor.data)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters.items()}

    def restore(self, snapshot: Mapping[str, np.ndarray]) -> None:
        for name, values in snapshot.items():
            target = self.parameters[name]
            if target.shape != values.shape:
                raise DimensionError(
                    f"restore {name}: shape {list(values.shape)} does not match "
                    f"{list(target.shape)}"
                )
            target.data[...] = values

    @staticmethod
    def topological_order(loss: Tensor) -> list[Tensor]:
        """Every node reachable from ``loss``, inputs before outputs."""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        """Populate ``grad`` on every parameter and reachable leaf.

        Parameters that do not contribute to ``loss`` receive zeros.
        """
        if loss.size != 1:
            raise ContractError(f"loss must be scalar, got shape {list(loss.shape)}")
        order = self.topological_order(loss)
        self.nodes = order
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad
        for node in order:
            if node.requires_grad:
                node.grad = np.array(grads.get(id(node), np.zeros_like(node.data)))
        for tensor in self.parameters.values():
            if id(tensor) not in grads:
                tensor.grad = np.zeros_like(tensor.data)
        return {name: t.grad for name, t in self.parameters.items()}


def backward(graph: Graph, loss: Tensor) -> dict[str, np.ndarray]:
    """Run the reverse sweep of ``graph`` from a scalar ``loss``."""
    return graph.backward(loss)
