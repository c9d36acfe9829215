"""
Dense tensor with reverse-mode automatic differentiation.

A `Tensor` wraps a float64 numpy array. Every differentiable primitive is a
`Function` subclass (see `functional.py`) whose `apply` runs the forward pass
on raw arrays and records itself as the creator of the output. `backward()`
topologically sorts the recorded graph and pushes gradients from the scalar
loss to every leaf that requires them.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from msgv_types.errors import NonFiniteError, ShapeError

DEFAULT_DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run forward passes without recording a graph."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Function:
    """
    Base class for differentiable primitives.

    Subclasses set `name` and implement `forward(*arrays, **kwargs)` returning
    an ndarray, and `backward(grad)` returning one gradient array (or None)
    per input tensor. Anything `backward` needs from the forward pass is
    stashed on `self`.
    """

    name = "function"

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: forward not implemented")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{self.name}: backward not implemented")

    @classmethod
    def apply(cls, *inputs: Union["Tensor", float, np.ndarray], **kwargs: Any) -> "Tensor":
        tensors = tuple(as_tensor(x) for x in inputs)
        func = cls(*tensors)
        out = func.forward(*(t.data for t in tensors), **kwargs)
        out = np.asarray(out, dtype=DEFAULT_DTYPE)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(cls.name)
        requires_grad = _grad_enabled and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, _creator=func if requires_grad else None)

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out the axes numpy broadcasting added or stretched."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """
    Row-major float64 array plus an optional gradient accumulator.

    Leaves are created by the user (parameters, inputs); non-leaves carry the
    `Function` that produced them. Only leaves with `requires_grad` keep a
    `.grad` after `backward()`.
    """

    __array_priority__ = 100

    def __init__(
        self,
        data: Union[np.ndarray, float, int, Sequence[Any]],
        requires_grad: bool = False,
        _creator: Optional[Function] = None,
    ):
        self.data = np.asarray(data, dtype=DEFAULT_DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._creator = _creator

    # -- properties -----------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._creator is None

    @property
    def op(self) -> str:
        return self._creator.name if self._creator is not None else "leaf"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- autodiff -------------------------------------------------------
    def backward(self, grad: Optional[np.ndarray] = None) -> Dict[int, np.ndarray]:
        """
        Accumulate d(self)/d(leaf) into every leaf with requires_grad.

        Returns a map from id(leaf) to the gradient contribution of this call.
        """
        contributions, leaves = _backprop(self, grad)
        for key, g in contributions.items():
            leaf = leaves[key]
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
        return contributions

    # -- operator sugar (implemented in functional) ---------------------
    def __add__(self, other):
        from autodiff import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from autodiff import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from autodiff import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from autodiff import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from autodiff import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from autodiff import functional as F
        return F.mul(other, self)

    def __truediv__(self, other):
        from autodiff import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other):
        from autodiff import functional as F
        return F.div(other, self)

    def __neg__(self):
        from autodiff import functional as F
        return F.neg(self)

    def __pow__(self, exponent: float):
        from autodiff import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from autodiff import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from autodiff import functional as F
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from autodiff import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from autodiff import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from autodiff import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from autodiff import functional as F
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def abs(self) -> "Tensor":
        from autodiff import functional as F
        return F.abs(self)


def as_tensor(x: Union[Tensor, float, int, np.ndarray, Sequence[Any]]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class GraphNode:
    op: str
    input_ids: List[int]
    output: Tensor


@dataclass
class ComputeGraph:
    """Topologically ordered view of the graph that produced an output."""

    nodes: List[Tensor] = field(default_factory=list)

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputeGraph":
        order: List[Tensor] = []
        visited = set()
        # iterative DFS; synthesis graphs are far deeper than the recursion limit
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._creator is not None:
                for inp in reversed(node._creator.inputs):
                    if id(inp) not in visited:
                        stack.append((inp, False))
        return cls(nodes=order)

    def records(self) -> List[GraphNode]:
        return [
            GraphNode(
                op=n.op,
                input_ids=[id(i) for i in n._creator.inputs] if n._creator else [],
                output=n,
            )
            for n in self.nodes
        ]


def _backprop(
    output: Tensor, grad: Optional[np.ndarray] = None
) -> Tuple[Dict[int, np.ndarray], Dict[int, Tensor]]:
    if grad is None:
        if output.size != 1:
            raise ShapeError("backward on non-scalar output", output.shape, ())
        grad = np.ones_like(output.data)
    elif grad.shape != output.shape:
        raise ShapeError("backward seed", grad.shape, output.shape)

    graph = ComputeGraph.from_output(output)
    pending: Dict[int, np.ndarray] = {id(output): np.asarray(grad, dtype=DEFAULT_DTYPE)}
    contributions: Dict[int, np.ndarray] = {}
    leaves: Dict[int, Tensor] = {}
    for node in reversed(graph.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._creator is None:
            if node.requires_grad:
                contributions[id(node)] = g
                leaves[id(node)] = node
            continue
        input_grads = node._creator.backward(g)
        for inp, ig in zip(node._creator.inputs, input_grads):
            if ig is None or not inp.requires_grad:
                continue
            if ig.shape != inp.shape:
                raise ShapeError(f"{node.op} backward", ig.shape, inp.shape)
            key = id(inp)
            pending[key] = ig if key not in pending else pending[key] + ig
    return contributions, leaves


def grad(output: Tensor, inputs: Sequence[Tensor], seed: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """
    d(output)/d(input) for each leaf in `inputs`, without touching any `.grad`.

    Leaves the output does not depend on get zeros.
    """
    contributions, _ = _backprop(output, seed)
    return [np.array(contributions[id(t)]) if id(t) in contributions else np.zeros_like(t.data) for t in inputs]
