"""Differentiable operations.

Broadcasting is limited to scalar-vs-tensor and equal shapes for the elementwise
ops; anything wider must go through ``expand`` so every backward rule stays
explicit.
"""
from __future__ import annotations

from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from common.errors import ConfigurationError, DimensionError
from autodiff.tensor import DTYPE, Function, Tensor, backward

Array = np.ndarray


def _as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _check_elementwise(name: str, a: Array, b: Array) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    raise DimensionError(f"{name}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(grad: Array, shape: tuple[int, ...]) -> Array:
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum(), dtype=DTYPE)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _is_basic_index(index: Any) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


class Add(Function):
    def forward(self, a: Array, b: Array) -> Array:
        _check_elementwise("add", a, b)
        self.ctx["shapes"] = (a.shape, b.shape)
        return a + b

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        sa, sb = self.ctx["shapes"]
        return _reduce_to(grad, sa), _reduce_to(grad, sb)


class Sub(Function):
    def forward(self, a: Array, b: Array) -> Array:
        _check_elementwise("sub", a, b)
        self.ctx["shapes"] = (a.shape, b.shape)
        return a - b

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        sa, sb = self.ctx["shapes"]
        return _reduce_to(grad, sa), _reduce_to(-grad, sb)


class Mul(Function):
    def forward(self, a: Array, b: Array) -> Array:
        _check_elementwise("mul", a, b)
        self.ctx["arrays"] = (a, b)
        return a * b

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        a, b = self.ctx["arrays"]
        return _reduce_to(grad * b, a.shape), _reduce_to(grad * a, b.shape)


class Scale(Function):
    def forward(self, a: Array, factor: float = 1.0) -> Array:
        self.ctx["factor"] = float(factor)
        return a * float(factor)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (grad * self.ctx["factor"],)


class Sigmoid(Function):
    def forward(self, a: Array) -> Array:
        out = expit(a)
        self.ctx["out"] = out
        return out

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        out = self.ctx["out"]
        return (grad * out * (1.0 - out),)


class Tanh(Function):
    def forward(self, a: Array) -> Array:
        out = np.tanh(a)
        self.ctx["out"] = out
        return out

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        out = self.ctx["out"]
        return (grad * (1.0 - out * out),)


class Relu(Function):
    def forward(self, a: Array) -> Array:
        mask = a > 0
        self.ctx["mask"] = mask
        return np.where(mask, a, 0.0)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (np.where(self.ctx["mask"], grad, 0.0),)


class Exp(Function):
    def forward(self, a: Array) -> Array:
        out = np.exp(a)
        self.ctx["out"] = out
        return out

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (grad * self.ctx["out"],)


class Log(Function):
    def forward(self, a: Array) -> Array:
        self.ctx["a"] = a
        return np.log(a)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (grad / self.ctx["a"],)


class MatMul(Function):
    def forward(self, a: Array, b: Array) -> Array:
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
        if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
            raise DimensionError(f"matmul batch dimensions differ: {a.shape} x {b.shape}")
        self.ctx["arrays"] = (a, b)
        return np.matmul(a, b)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        a, b = self.ctx["arrays"]
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        if b.ndim == 2:
            grad_b = a.reshape(-1, a.shape[-1]).T @ grad.reshape(-1, grad.shape[-1])
        else:
            grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return grad_a, grad_b


class Expand(Function):
    def forward(self, a: Array, shape: tuple[int, ...] = ()) -> Array:
        if a.ndim > len(shape):
            raise DimensionError(f"cannot expand {a.shape} to {shape}")
        trailing = shape[len(shape) - a.ndim:]
        for have, want in zip(a.shape, trailing):
            if have not in (1, want):
                raise DimensionError(f"cannot expand {a.shape} to {shape}")
        self.ctx["shape"] = a.shape
        return np.broadcast_to(a, shape)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (_reduce_to(grad, self.ctx["shape"]),)


class Reshape(Function):
    def forward(self, a: Array, shape: tuple[int, ...] = ()) -> Array:
        self.ctx["shape"] = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise DimensionError(f"cannot reshape {a.shape} to {shape}") from exc

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (grad.reshape(self.ctx["shape"]),)


class Transpose(Function):
    def forward(self, a: Array, axes: Optional[tuple[int, ...]] = None) -> Array:
        axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
        self.ctx["inverse"] = tuple(np.argsort(axes))
        return np.transpose(a, axes)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return (np.transpose(grad, self.ctx["inverse"]),)


class Index(Function):
    def forward(self, a: Array, index: Any = None) -> Array:
        self.ctx["shape"] = a.shape
        self.ctx["index"] = index
        return a[index]

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        out = np.zeros(self.ctx["shape"], dtype=DTYPE)
        index = self.ctx["index"]
        if _is_basic_index(index):
            out[index] += grad
        else:
            np.add.at(out, index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays: Array, axis: int = 0) -> Array:
        self.ctx["axis"] = axis
        self.ctx["splits"] = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as exc:
            raise DimensionError(f"concat: {exc}") from exc

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        return tuple(np.split(grad, self.ctx["splits"], axis=self.ctx["axis"]))


class Stack(Function):
    def forward(self, *arrays: Array, axis: int = 0) -> Array:
        self.ctx["axis"] = axis
        try:
            return np.stack(arrays, axis=axis)
        except ValueError as exc:
            raise DimensionError(f"stack: {exc}") from exc

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        moved = np.moveaxis(grad, self.ctx["axis"], 0)
        return tuple(moved[i] for i in range(moved.shape[0]))


class ReduceSum(Function):
    def forward(self, a: Array, axis: Any = None, keepdims: bool = False) -> Array:
        self.ctx.update(shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(a.sum(axis=axis, keepdims=keepdims), dtype=DTYPE)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        shape, axis, keepdims = self.ctx["shape"], self.ctx["axis"], self.ctx["keepdims"]
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class Softmax(Function):
    def forward(self, a: Array, axis: int = -1) -> Array:
        out = softmax_array(a, axis=axis)
        self.ctx.update(out=out, axis=axis)
        return out

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        out, axis = self.ctx["out"], self.ctx["axis"]
        return (out * (grad - np.sum(grad * out, axis=axis, keepdims=True)),)


class LayerNorm(Function):
    def forward(self, x: Array, gain: Array, bias: Array, eps: float = 1e-5) -> Array:
        if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
            raise DimensionError(f"layer_norm params {gain.shape}/{bias.shape} do not match {x.shape}")
        mu = x.mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + eps)
        xhat = (x - mu) * inv_std
        self.ctx.update(xhat=xhat, inv_std=inv_std, gain=gain)
        return xhat * gain + bias

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        xhat, inv_std, gain = self.ctx["xhat"], self.ctx["inv_std"], self.ctx["gain"]
        n = xhat.shape[-1]
        g_xhat = grad * gain
        grad_x = (inv_std / n) * (
            n * g_xhat
            - g_xhat.sum(axis=-1, keepdims=True)
            - xhat * (g_xhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(grad.ndim - 1))
        return grad_x, (grad * xhat).sum(axis=lead), grad.sum(axis=lead)


class SoftmaxCrossEntropy(Function):
    def forward(self, logits: Array, labels: Any = None) -> Array:
        batched = logits.ndim == 2
        if logits.ndim not in (1, 2):
            raise DimensionError(f"logits must be a vector or a batch of vectors, got {logits.shape}")
        z = logits if batched else logits[None, :]
        y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
        if y.shape[0] != z.shape[0]:
            raise DimensionError(f"{y.shape[0]} labels for {z.shape[0]} rows of logits")
        num_classes = z.shape[1]
        if np.any(y < 0) or np.any(y >= num_classes):
            raise IndexError(f"label out of range for {num_classes} classes: {y.tolist()}")
        shifted = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        rows = np.arange(z.shape[0])
        losses = log_norm - shifted[rows, y]
        probs = np.exp(shifted - log_norm[:, None])
        self.ctx.update(probs=probs, labels=y, batched=batched)
        return np.asarray(losses.mean(), dtype=DTYPE)

    def backward(self, grad: Array) -> tuple[Optional[Array], ...]:
        probs, y = self.ctx["probs"], self.ctx["labels"]
        d = probs.copy()
        d[np.arange(d.shape[0]), y] -= 1.0
        d *= grad / d.shape[0]
        return (d if self.ctx["batched"] else d[0], None)


class LossTensor(Tensor):
    __slots__ = ("probs",)


def softmax_array(z: Array, axis: int = -1) -> Array:
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(_as_tensor(a), _as_tensor(b))


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(_as_tensor(a), _as_tensor(b))


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(_as_tensor(a), _as_tensor(b))


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=factor)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def expand(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Expand.apply(a, shape=tuple(shape))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return Transpose.apply(a, axes=None if axes is None else tuple(axes))


def index(a: Tensor, idx: Any) -> Tensor:
    return Index.apply(a, index=idx)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Stack.apply(*tensors, axis=axis)


def reduce_sum(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    return ReduceSum.apply(a, axis=axis, keepdims=keepdims)


def reduce_mean(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(a, axis=axis)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gain, bias, eps=eps)


def pad_left(a: Tensor, amount: int, axis: int) -> Tensor:
    if amount <= 0:
        return a
    shape = list(a.shape)
    shape[axis] = amount
    return concat([Tensor.zeros(shape), a], axis=axis)


def softmax_cross_entropy(logits: Tensor, label: Any) -> LossTensor:
    """Mean of -log softmax(logits)[label]; ``probs`` holds the softmax output."""
    fn = SoftmaxCrossEntropy(logits, Tensor(0.0))
    value = fn.forward(logits.data, labels=label)
    out = LossTensor._from_op(value, fn if logits.requires_grad else None, logits.requires_grad)
    out.probs = fn.ctx["probs"] if logits.ndim == 2 else fn.ctx["probs"][0]
    return out


_ELEMENTWISE: dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "exp": exp,
}


def elementwise(op: str, a: Any, b: Any = None, *, factor: float | None = None) -> Tensor:
    if op == "scale":
        if factor is None:
            raise ConfigurationError("scale needs a factor")
        return scale(_as_tensor(a), factor)
    fn = _ELEMENTWISE.get(op)
    if fn is None:
        raise ConfigurationError(f"unknown elementwise op {op!r}")
    if op in {"add", "sub", "mul"}:
        if b is None:
            raise ConfigurationError(f"{op} needs two operands")
        return fn(a, b)
    return fn(_as_tensor(a))


def input_gradient(
    forward: Callable[[Tensor], Tensor],
    inputs: Any,
    target_class: int,
    score: str = "logit",
) -> np.ndarray:
    """Gradient of the target-class score with respect to every input cell.

    ``score="logit"`` differentiates the pre-softmax score, ``"probability"`` the
    softmax output. A leading batch axis is allowed; the per-sample scores are
    summed, which leaves per-sample gradients intact because samples never mix.
    """
    raw = inputs.data if isinstance(inputs, Tensor) else inputs
    x = Tensor(raw, requires_grad=True)
    out = forward(x)
    if score == "probability":
        out = softmax(out, axis=-1)
    elif score != "logit":
        raise ConfigurationError(f"unknown attribution score {score!r}")
    num_classes = out.shape[-1]
    if not 0 <= int(target_class) < num_classes:
        raise IndexError(f"target class {target_class} out of range for {num_classes} classes")
    selected = index(out, (Ellipsis, int(target_class))).sum()
    backward(selected, wrt=[x])
    assert x.grad is not None
    return x.grad
