from __future__ import annotations

import logging
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from common.errors import ContractError

logger = logging.getLogger(__name__)

DTYPE = np.float64


class Function:
    """A differentiable operation; one instance is one node on the tape.

    ``forward`` receives the raw arrays of the input tensors, ``backward`` receives
    dL/d(output) and returns dL/d(input) for each input (``None`` for inputs that
    need no gradient).
    """

    __slots__ = ("inputs", "ctx")

    def __init__(self, *inputs: "Tensor") -> None:
        self.inputs = inputs
        self.ctx: dict[str, Any] = {}

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @property
    def name(self) -> str:
        return type(self).__name__

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor._from_op(out, fn if requires_grad else None, requires_grad)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "creator")

    def __init__(self, data: Any, requires_grad: bool = False) -> None:
        # Always copy: a leaf never aliases caller storage.
        self.data = np.array(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.creator: Optional[Function] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, creator: Optional[Function], requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=DTYPE)
        out.requires_grad = requires_grad
        out.grad = None
        out.creator = creator
        return out

    @classmethod
    def zeros(cls, shape: Sequence[int], requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(tuple(shape), dtype=DTYPE), requires_grad=requires_grad)

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
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self, wrt: Iterable["Tensor"] = ()) -> None:
        backward(self, wrt)

    def __repr__(self) -> str:
        op = self.creator.name if self.creator is not None else "leaf"
        return f"Tensor(shape={self.shape}, op={op}, requires_grad={self.requires_grad})"

    # Operators delegate to autodiff.functional.
    def __add__(self, other: Any) -> "Tensor":
        return F.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return F.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return F.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return F.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return F.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return F.mul(other, self)

    def __neg__(self) -> "Tensor":
        return F.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return F.index(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        return F.reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        return F.reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        return F.reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def transpose(self, *axes: int) -> "Tensor":
        return F.transpose(self, axes if axes else None)

    def expand(self, shape: Sequence[int]) -> "Tensor":
        return F.expand(self, tuple(shape))


class Tape:
    """Topologically ordered record of the ops between the leaves and one root.

    Rebuilt for every backward pass (define-by-run); each node appears once and
    after every node that produced one of its inputs.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: list[Tensor]) -> None:
        self.nodes = nodes

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in reversed(node.creator.inputs):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def run_backward(self, root: Tensor) -> dict[int, np.ndarray]:
        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            upstream = grads.get(id(node))
            if upstream is None or node.creator is None:
                continue
            input_grads = node.creator.backward(upstream)
            for parent, g in zip(node.creator.inputs, input_grads):
                if g is None or not parent.requires_grad:
                    continue
                if g.shape != parent.data.shape:
                    raise ContractError(
                        f"{node.creator.name} produced gradient of shape {g.shape} "
                        f"for input of shape {parent.data.shape}"
                    )
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
        return grads


def backward(loss: Tensor, wrt: Iterable[Tensor] = ()) -> Tape:
    """Populate ``.grad`` with d(loss)/d(t) for every grad-requiring tensor on the tape.

    Gradients are overwritten, not accumulated. Tensors listed in ``wrt`` that the
    loss does not depend on receive a zero gradient.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = Tape.record(loss) if loss.requires_grad else Tape([])
    grads = tape.run_backward(loss) if loss.requires_grad else {}
    for node in tape.nodes:
        node.grad = grads.get(id(node), np.zeros_like(node.data))
    for t in wrt:
        t.grad = grads.get(id(t), np.zeros_like(t.data))
    logger.debug("backward nodes=%d", len(tape))
    return tape


from autodiff import functional as F  # noqa: E402  (functional needs Tensor defined)
