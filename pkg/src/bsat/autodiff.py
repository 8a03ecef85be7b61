"""Minimal reverse-mode gradient engine over dense numpy arrays.

Covers exactly the ops the forecaster needs: broadcasting arithmetic,
batched matmul, reshape/transpose, reductions, exp/sqrt, softmax, GELU,
row gather, and a rotary rotation whose angle is itself differentiable.
Gradients accumulate on leaf tensors created with ``requires_grad=True``;
``backward()`` walks the tape in reverse topological order.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _sum_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back down to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # -- graph plumbing ----------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis, keepdims)


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data + b.data

    def backward(g):
        a._accumulate(_sum_to_shape(g, a.data.shape).astype(a.dtype, copy=False))
        b._accumulate(_sum_to_shape(g, b.data.shape).astype(b.dtype, copy=False))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data * b.data

    def backward(g):
        a._accumulate(_sum_to_shape(g * b.data, a.data.shape).astype(a.dtype, copy=False))
        b._accumulate(_sum_to_shape(g * a.data, b.data.shape).astype(b.dtype, copy=False))

    return _make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data / b.data

    def backward(g):
        a._accumulate(_sum_to_shape(g / b.data, a.data.shape).astype(a.dtype, copy=False))
        b._accumulate(
            _sum_to_shape(-g * a.data / (b.data * b.data), b.data.shape).astype(
                b.dtype, copy=False
            )
        )

    return _make(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have at least 2 dimensions")
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        a._accumulate(_sum_to_shape(ga, a.data.shape))
        b._accumulate(_sum_to_shape(gb, b.data.shape))

    return _make(data, (a, b), backward)


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    data = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _lift(a)
    axes = tuple(axes)
    data = a.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        a._accumulate(g.transpose(inverse))

    return _make(data, (a,), backward)


def tensor_sum(a, axis=None, keepdims=False) -> Tensor:
    a = _lift(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g, a.data.shape)
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            grad = np.broadcast_to(g, a.data.shape)
        a._accumulate(np.ascontiguousarray(grad))

    return _make(data, (a,), backward)


def tensor_mean(a, axis=None, keepdims=False) -> Tensor:
    a = _lift(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)]
    )
    return mul(tensor_sum(a, axis, keepdims), 1.0 / float(count))


def square(a) -> Tensor:
    return mul(a, a)


def sqrt(a) -> Tensor:
    a = _lift(a)
    data = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * (0.5 / data))

    return _make(data, (a,), backward)


def exp(a) -> Tensor:
    a = _lift(a)
    data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * data)

    return _make(data, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _lift(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        a._accumulate(data * (g - inner))

    return _make(data, (a,), backward)


def gelu(a) -> Tensor:
    """Exact erf-form GELU."""
    a = _lift(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    data = a.data * cdf

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * a.data * a.data)
        a._accumulate(g * (cdf + a.data * pdf))

    return _make(data, (a,), backward)


def take_rows(table, indices) -> Tensor:
    """Row gather ``table[indices]`` with scatter-add backward."""
    table = _lift(table)
    idx = np.asarray(indices)
    data = table.data[idx]

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, idx, g)
        table._accumulate(grad)

    return _make(data, (table,), backward)


def rotary(x, angles) -> Tensor:
    """Rotate interleaved pairs of the last axis of ``x`` by ``angles``.

    ``x`` has even last dimension ``d``; ``angles`` broadcasts against the
    ``(..., d/2)`` pair shape. Both the vector and the angle are
    differentiated: the angle gradient is ``-g1*y2 + g2*y1`` summed over the
    broadcast axes.
    """
    x, angles = _lift(x), _lift(angles)
    if x.data.shape[-1] % 2 != 0:
        raise ValueError("rotary requires an even last dimension")
    theta = np.broadcast_to(angles.data, x.data.shape[:-1] + (x.data.shape[-1] // 2,))
    cos, sin = np.cos(theta), np.sin(theta)
    x1, x2 = x.data[..., 0::2], x.data[..., 1::2]
    y1 = x1 * cos - x2 * sin
    y2 = x1 * sin + x2 * cos
    data = np.empty_like(x.data)
    data[..., 0::2] = y1
    data[..., 1::2] = y2

    def backward(g):
        g1, g2 = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(x.data)
        gx[..., 0::2] = g1 * cos + g2 * sin
        gx[..., 1::2] = -g1 * sin + g2 * cos
        x._accumulate(gx)
        gtheta = -g1 * y2 + g2 * y1
        angles._accumulate(
            _sum_to_shape(gtheta, angles.data.shape).astype(angles.dtype, copy=False)
        )

    return _make(data, (x, angles), backward)
