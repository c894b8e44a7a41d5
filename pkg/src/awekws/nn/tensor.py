"""Reverse-mode autodiff over numpy arrays.

Ops build a graph while computing forward values; Tensor.backward() walks it
in reverse topological order. Backward closures are only attached when some
input requires gradients, so inference passes carry no tape overhead.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def _accum(self, g: np.ndarray) -> None:
        # Copy on first touch: incoming arrays may be views into a parent's
        # grad buffer, and later += must not write through them.
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype)
            if self.grad.shape != self.data.shape:
                self.grad = np.broadcast_to(self.grad, self.data.shape).copy()
        else:
            self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ShapeMismatch(f"backward() needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar; scalars and ndarrays are treated as constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, const):
        return power(self, const)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(data, parents: Sequence[Tensor], backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    if not req:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=tuple(parents), backward=backward)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * out_data / b.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch("matmul operands must be at least 2-D")
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _make(out_data, (a, b), bw)


def _intpow(x: np.ndarray, n: int) -> np.ndarray:
    """Small integer powers by repeated multiply; np.power is far slower."""
    if n == 0:
        return np.ones_like(x)
    if n == 1:
        return x
    if n == 2:
        return x * x
    if n == 3:
        return x * x * x
    return x ** n


def power(a, const: float) -> Tensor:
    a = _as_tensor(a)
    is_int = float(const).is_integer() and 0 <= const <= 4
    out_data = _intpow(a.data, int(const)) if is_int else a.data ** const

    def bw(g):
        if is_int:
            a._accum(g * const * _intpow(a.data, int(const) - 1))
        else:
            a._accum(g * const * a.data ** (const - 1))

    return _make(out_data, (a,), bw)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def bw(g):
        a._accum(g * out_data)

    return _make(out_data, (a,), bw)


def log(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.log(a.data)

    def bw(g):
        a._accum(g / a.data)

    return _make(out_data, (a,), bw)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def bw(g):
        a._accum(g * 0.5 / out_data)

    return _make(out_data, (a,), bw)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def bw(g):
        a._accum(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bw)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # numerically symmetric form, no overflow either side
    with np.errstate(over="ignore"):
        out_data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                            np.exp(a.data) / (1.0 + np.exp(a.data)))

    def bw(g):
        a._accum(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bw)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0)

    def bw(g):
        a._accum(g * (a.data > 0))

    return _make(out_data, (a,), bw)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        a._accum(np.broadcast_to(g, a.data.shape))

    return _make(out_data, (a,), bw)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(tsum(a, axis, keepdims), 1.0 / float(count))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def bw(g):
        a._accum(g.reshape(a.data.shape))

    return _make(out_data, (a,), bw)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.transpose(axes)
    inv = np.argsort(axes)

    def bw(g):
        a._accum(g.transpose(inv))

    return _make(out_data, (a,), bw)


def getitem(a, idx) -> Tensor:
    """Basic (slice/int) indexing only; basic indexing never aliases cells."""
    a = _as_tensor(a)
    out_data = a.data[idx]

    def bw(g):
        full = np.zeros_like(a.data)
        full[idx] += g
        a._accum(full)

    return _make(out_data, (a,), bw)


def concat(tensors: Sequence, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bw(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offset, offset + size)
                t._accum(g[tuple(sl)])
            offset += size

    return _make(out_data, tensors, bw)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = np.broadcast_to(a.data, shape)

    def bw(g):
        a._accum(_unbroadcast(g, a.data.shape))

    return _make(out_data, (a,), bw)


def masked_softmax(a, mask: np.ndarray | None) -> Tensor:
    """Softmax over the last axis; positions where mask is False get weight
    exactly 0 and receive zero gradient. mask=None means all positions valid.
    Every row must keep at least one valid position."""
    a = _as_tensor(a)
    x = a.data
    if mask is None:
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
    else:
        mask = np.broadcast_to(mask, x.shape)
        neg = np.where(mask, x, -np.inf)
        rowmax = neg.max(axis=-1, keepdims=True)
        # exp(-inf) is exactly 0, so masked entries drop out of the sum.
        e = np.exp(neg - rowmax)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        inner = (g * out_data).sum(axis=-1, keepdims=True)
        a._accum(out_data * (g - inner))

    return _make(out_data, (a,), bw)


def softmax(a) -> Tensor:
    return masked_softmax(a, None)


_GELU_COEF = 0.044715
_GELU_SCALE = 0.7978845608028654  # sqrt(2/pi)


def gelu(a) -> Tensor:
    """Tanh-form gaussian error linear unit, fused into one op.

    Smooth everywhere, which keeps finite-difference gradient checks clean,
    and a single node keeps the tape short on the hot path.
    """
    a = _as_tensor(a)
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_SCALE * (x + _GELU_COEF * (x2 * x)))
    out_data = 0.5 * x * (1.0 + t)

    def bw(g):
        du = _GELU_SCALE * (1.0 + 3.0 * _GELU_COEF * x2)
        a._accum(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du))

    return _make(out_data, (a,), bw)


def layer_norm(a, gain, bias, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then apply a
    learned elementwise affine. Fused forward and backward."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    x = a.data
    n = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv
    out_data = xhat * gain.data + bias.data

    def bw(g):
        reduce_axes = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            gain._accum((g * xhat).sum(axis=reduce_axes))
        if bias.requires_grad:
            bias._accum(g.sum(axis=reduce_axes))
        if a.requires_grad:
            gx = g * gain.data
            mean_gx = gx.mean(axis=-1, keepdims=True)
            mean_gx_xhat = (gx * xhat).mean(axis=-1, keepdims=True)
            a._accum(inv * (gx - mean_gx - xhat * mean_gx_xhat))

    return _make(out_data, (a, gain, bias), bw)
