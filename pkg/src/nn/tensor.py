"""
Tensor and Reverse-Mode Differentiation

A float64 ndarray wrapper that records the operation producing it. Calling
`backward()` on a scalar walks the recorded graph once in reverse topological
order and accumulates gradients into leaf tensors with requires_grad set.

Every tensor is checked for NaN/Inf on creation.
"""

from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import NonFiniteError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_recording = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference)."""
    global _recording
    previous = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = previous


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """N-dimensional float64 array with optional gradient tracking."""

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        op: str = "leaf",
    ):
        array = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(f"Non-finite value produced by '{op}'", op=op)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = op
        self._parents = parents
        self._backward_fn = backward_fn

    # -------------------------------------------------------------------------
    # Construction helpers
    # -------------------------------------------------------------------------

    @classmethod
    def from_op(
        cls, data: np.ndarray, parents: Tuple["Tensor", ...], backward_fn: BackwardFn, op: str
    ) -> "Tensor":
        """Create an op output, recording parents only when a gradient can flow."""
        tracked = _recording and any(parent.requires_grad for parent in parents)
        if tracked:
            return cls(data, requires_grad=True, parents=parents, backward_fn=backward_fn, op=op)
        return cls(data, op=op)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # -------------------------------------------------------------------------
    # Arithmetic
    # -------------------------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor.from_op(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor.from_op(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __matmul__(self, other: "Tensor") -> "Tensor":
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul shape mismatch: {self.shape} @ {other.shape}")
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return g @ b.T, a.T @ g

        return Tensor.from_op(a @ b, (self, other), backward, "matmul")

    def __pow__(self, exponent: float) -> "Tensor":
        a = self.data

        def backward(g: np.ndarray):
            return (g * exponent * a ** (exponent - 1),)

        return Tensor.from_op(a ** exponent, (self,), backward, "pow")

    def sum(self) -> "Tensor":
        shape = self.shape
        return Tensor.from_op(
            np.asarray(self.data.sum()), (self,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum"
        )

    def mean(self) -> "Tensor":
        n = self.data.size
        return self.sum() * (1.0 / n)

    # -------------------------------------------------------------------------
    # Backward
    # -------------------------------------------------------------------------

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Accumulate d(self)/d(leaf) into every reachable leaf's `.grad`.

        Raises:
            ShapeError: self is not a scalar
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            return
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._backward_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def parameter(data) -> Tensor:
    """Leaf tensor that receives gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, op="param")


def gradients(loss: Tensor, params: Sequence[Tensor]) -> List[np.ndarray]:
    """
    Backpropagate `loss` and return one gradient per parameter.

    Existing `.grad` values are cleared first. Parameters the loss does not
    depend on get an all-zero gradient.
    """
    for param in params:
        param.zero_grad()
    loss.backward()
    return [
        param.grad if param.grad is not None else np.zeros_like(param.data) for param in params
    ]
