"""Reverse-mode automatic differentiation over numpy arrays.

Small on purpose: exactly the operations the enhancement models and the
intelligibility objective need, each with an analytic backward pass. Values
are float64 throughout so gradient checks have headroom.
"""
from __future__ import annotations

import functools

import numpy as np


class Tensor:
    """A numpy array plus the bookkeeping to backpropagate through it."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    # keep numpy from absorbing us in mixed expressions like `ndarray * tensor`;
    # the reflected operator below runs instead
    __array_ufunc__ = None

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        if self.values.size != 1:
            raise ValueError("backward() needs a scalar loss")
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in topo:
            if node.requires_grad:
                node.grad = np.zeros_like(node.values)
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward is not None and node.requires_grad:
                node._backward(node.grad)

    def item(self) -> float:
        return float(self.values)

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(a, b, out_values, da, db):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(da(g), a.values.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(db(g), b.values.shape)

    return Tensor(out_values, _parents=(a, b), _backward=backward), a, b


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out, a, b = _binary(a, b, a.values + b.values, lambda g: g, lambda g: g)
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out, a, b = _binary(a, b, a.values - b.values, lambda g: g, lambda g: -g)
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out, a, b = _binary(a, b, a.values * b.values,
                        lambda g: g * b.values, lambda g: g * a.values)
    return out


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out, a, b = _binary(a, b, a.values / b.values,
                        lambda g: g / b.values,
                        lambda g: -g * a.values / (b.values * b.values))
    return out


def power(a, exponent: float):
    a = as_tensor(a)
    out_values = a.values ** exponent

    def backward(g):
        if a.requires_grad:
            a.grad += g * exponent * a.values ** (exponent - 1)

    return Tensor(out_values, _parents=(a,), _backward=backward)


def sqrt(a):
    a = as_tensor(a)
    out_values = np.sqrt(a.values)

    def backward(g):
        if a.requires_grad:
            a.grad += g * 0.5 / np.sqrt(a.values)

    return Tensor(out_values, _parents=(a,), _backward=backward)


def tanh(a):
    a = as_tensor(a)
    out_values = np.tanh(a.values)

    def backward(g):
        if a.requires_grad:
            a.grad += g * (1.0 - out_values ** 2)

    return Tensor(out_values, _parents=(a,), _backward=backward)


def absolute(a):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.grad += g * np.sign(a.values)

    return Tensor(np.abs(a.values), _parents=(a,), _backward=backward)


def minimum(a, b):
    """Elementwise min; ties route the gradient to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.values <= b.values
    out, a, b = _binary(a, b, np.where(take_a, a.values, b.values),
                        lambda g: g * take_a, lambda g: g * ~take_a)
    return out


def maximum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.values >= b.values
    out, a, b = _binary(a, b, np.where(take_a, a.values, b.values),
                        lambda g: g * take_a, lambda g: g * ~take_a)
    return out


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out, a, b = _binary(a, b, a.values @ b.values,
                        lambda g: g @ b.values.T, lambda g: a.values.T @ g)
    return out


def sparse_matmul(matrix, a):
    """matrix is a fixed scipy.sparse operator; gradient uses its transpose."""
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.grad += matrix.T @ g

    return Tensor(matrix @ a.values, _parents=(a,), _backward=backward)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_values = a.values.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.grad += g
        elif keepdims:
            a.grad += np.broadcast_to(g, a.values.shape)
        else:
            a.grad += np.broadcast_to(np.expand_dims(g, axis), a.values.shape)

    return Tensor(out_values, _parents=(a,), _backward=backward)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.values.size if axis is None else a.values.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) / float(n)


def transpose(a, axes=None):
    a = as_tensor(a)
    axes_ = axes if axes is not None else tuple(reversed(range(a.values.ndim)))
    inverse = np.argsort(axes_)

    def backward(g):
        if a.requires_grad:
            a.grad += np.transpose(g, inverse)

    return Tensor(np.transpose(a.values, axes_), _parents=(a,), _backward=backward)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.grad += g.reshape(a.values.shape)

    return Tensor(a.values.reshape(shape), _parents=(a,), _backward=backward)


def getitem(a, key):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            np.add.at(a.grad, key, g)

    return Tensor(a.values[key], _parents=(a,), _backward=backward)


def index_rows(a, idx):
    """Select rows by integer index; backward scatter-adds them back."""
    a = as_tensor(a)
    idx = np.asarray(idx)

    def backward(g):
        if a.requires_grad:
            np.add.at(a.grad, idx, g)

    return Tensor(a.values[idx], _parents=(a,), _backward=backward)


def unfold(a, size: int, step: int):
    """Sliding windows along the last axis: (..., n) -> (..., n_win, size)."""
    a = as_tensor(a)
    windows = np.lib.stride_tricks.sliding_window_view(
        a.values, size, axis=-1)[..., ::step, :].copy()
    n_win = windows.shape[-2]

    def backward(g):
        if not a.requires_grad:
            return
        for k in range(size):
            a.grad[..., k:k + (n_win - 1) * step + 1:step] += g[..., :, k]

    return Tensor(windows, _parents=(a,), _backward=backward)


def fold(a, step: int, out_len: int):
    """Overlap-add windows from the last two axes: (..., n_win, size) -> (..., out_len).

    Exact adjoint of `unfold` with the same step.
    """
    a = as_tensor(a)
    n_win, size = a.values.shape[-2:]
    out = np.zeros(a.values.shape[:-2] + (out_len,))
    for m in range(n_win):
        out[..., m * step:m * step + size] += a.values[..., m, :]

    def backward(g):
        if not a.requires_grad:
            return
        for m in range(n_win):
            a.grad[..., m, :] += g[..., m * step:m * step + size]

    return Tensor(out, _parents=(a,), _backward=backward)


@functools.lru_cache(maxsize=8)
def dft_matrices(frame_len: int, fft_len: int):
    """Real/imaginary DFT analysis matrices (frame_len x n_bins)."""
    t = np.arange(frame_len)[:, None]
    k = np.arange(fft_len // 2 + 1)[None, :]
    angle = 2.0 * np.pi * t * k / fft_len
    return np.cos(angle), -np.sin(angle)


def conv1d(x, weights, bias=None):
    """'Same'-padded 1-D convolution: (in_c, T) x (out_c, in_c, f) -> (out_c, T).

    out[o, t] = sum_{i,k} W[o, i, k] * x[i, t + k - f//2] (+ bias[o]).
    """
    x, weights = as_tensor(x), as_tensor(weights)
    out_c, in_c, f = weights.values.shape
    if x.values.ndim != 2 or x.values.shape[0] != in_c:
        raise ValueError(f"expected input ({in_c}, T), got {x.values.shape}")
    T = x.values.shape[1]
    pad_l = f // 2
    pad_r = f - 1 - pad_l
    xp = np.pad(x.values, ((0, 0), (pad_l, pad_r)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, f, axis=1)  # (in_c, T, f)
    col = np.ascontiguousarray(cols.transpose(0, 2, 1)).reshape(in_c * f, T)
    w_mat = weights.values.reshape(out_c, in_c * f)
    out_values = w_mat @ col
    parents = [x, weights]
    if bias is not None:
        bias = as_tensor(bias)
        out_values = out_values + bias.values[:, None]
        parents.append(bias)

    def backward(g):
        if weights.requires_grad:
            weights.grad += (g @ col.T).reshape(out_c, in_c, f)
        if bias is not None and bias.requires_grad:
            bias.grad += g.sum(axis=1)
        if x.requires_grad:
            gcol = (w_mat.T @ g).reshape(in_c, f, T)
            gxp = np.zeros_like(xp)
            for k in range(f):
                gxp[:, k:k + T] += gcol[:, k, :]
            x.grad += gxp[:, pad_l:pad_l + T]

    return Tensor(out_values, _parents=tuple(parents), _backward=backward)
