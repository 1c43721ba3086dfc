"""Minimal reverse-mode autodiff over float32 numpy arrays.

Just enough primitives for the forecasting model: elementwise arithmetic with
broadcasting, matmul, reshape/transpose/slicing/concat/pad, reductions, abs,
sqrt, exp, erf, and a bilinear gather. Every op records a backward closure on a
tape; Tensor.backward() walks the tape in reverse topological order.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from scipy import special

from ..errors import NonFiniteValue, ShapeMismatch

# Every op output is checked for NaN/Inf unless this is flipped off.
CHECK_FINITE = True

# float32 end-to-end for the model; the gradient checker switches to float64.
DTYPE = np.float32


@contextmanager
def default_dtype(dtype):
    global DTYPE
    old = DTYPE
    DTYPE = dtype
    try:
        yield
    finally:
        DTYPE = old


def _check(data: np.ndarray, opname: str) -> np.ndarray:
    if CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"non-finite values produced by {opname}")
    return data


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _make(data, parents, backward, opname):
        out = Tensor(_check(np.asarray(data, dtype=DTYPE), opname))
        tracked = tuple(p for p in parents if p.requires_grad)
        if tracked:
            out.requires_grad = True
            out._parents = tracked
            out._backward = backward
        return out

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self, grad=None):
        if grad is None:
            if self.size != 1:
                raise ShapeMismatch("backward() without grad requires a scalar tensor")
            grad = np.ones_like(self.data)
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=DTYPE))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._make(a.data + b.data, (a, b), bwd, "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g, b.shape))

        return Tensor._make(a.data - b.data, (a, b), bwd, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._make(a.data * b.data, (a, b), bwd, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._make(a.data / b.data, (a, b), bwd, "div")

    def __neg__(self):
        a = self

        def bwd(g):
            a._accumulate(-g)

        return Tensor._make(-a.data, (a,), bwd, "neg")

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents supported")
        a = self

        def bwd(g):
            a._accumulate(g * exponent * a.data ** (exponent - 1))

        return Tensor._make(a.data ** exponent, (a,), bwd, "pow")

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        if a.ndim not in (1, 2) or b.ndim != 2:
            raise ShapeMismatch(f"matmul supports (n,k)@(k,m) or (k,)@(k,m), got {a.shape}@{b.shape}")
        if a.shape[-1] != b.shape[0]:
            raise ShapeMismatch(f"inner dims disagree: {a.shape} @ {b.shape}")

        def bwd(g):
            if a.ndim == 2:
                if a.requires_grad:
                    a._accumulate(g @ b.data.T)
                if b.requires_grad:
                    b._accumulate(a.data.T @ g)
            else:
                if a.requires_grad:
                    a._accumulate(b.data @ g)
                if b.requires_grad:
                    b._accumulate(np.outer(a.data, g))

        return Tensor._make(a.data @ b.data, (a, b), bwd, "matmul")

    # -- shape ops ---------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.shape

        def bwd(g):
            a._accumulate(g.reshape(old))

        return Tensor._make(a.data.reshape(shape), (a,), bwd, "reshape")

    def transpose(self, axes):
        a = self
        inv = np.argsort(axes)

        def bwd(g):
            a._accumulate(g.transpose(inv))

        return Tensor._make(a.data.transpose(axes), (a,), bwd, "transpose")

    def __getitem__(self, key):
        a = self

        def bwd(g):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[key] += g

        return Tensor._make(a.data[key], (a,), bwd, "getitem")

    # -- reductions & elementwise ------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self

        def bwd(g):
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.shape).copy())
                return
            gg = g
            if not keepdims:
                gg = np.expand_dims(gg, axis)
            a._accumulate(np.broadcast_to(gg, a.shape).copy())

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd, "sum")

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.size
        else:
            n = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def abs(self):
        a = self

        def bwd(g):
            a._accumulate(g * np.sign(a.data))

        return Tensor._make(np.abs(a.data), (a,), bwd, "abs")

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)

        def bwd(g):
            a._accumulate(g / (2.0 * out_data))

        return Tensor._make(out_data, (a,), bwd, "sqrt")

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def bwd(g):
            a._accumulate(g * out_data)

        return Tensor._make(out_data, (a,), bwd, "exp")

    def erf(self):
        a = self
        coef = np.float32(2.0 / np.sqrt(np.pi))

        def bwd(g):
            a._accumulate(g * coef * np.exp(-a.data * a.data))

        return Tensor._make(special.erf(a.data), (a,), bwd, "erf")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tensors, bwd, "concat")


def stack(tensors, axis=0) -> Tensor:
    return concat([t.reshape(t.shape[:axis] + (1,) + t.shape[axis:]) for t in map(as_tensor, tensors)], axis=axis)


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the two leading spatial axes of an (H, W, C) tensor."""
    if pad == 0:
        return x
    a = x

    def bwd(g):
        a._accumulate(g[pad:-pad, pad:-pad, :])

    data = np.pad(a.data, ((pad, pad), (pad, pad), (0, 0)))
    return Tensor._make(data, (a,), bwd, "pad2d")


def pad3d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the three leading spatial axes of a (D, H, W, C) tensor."""
    if pad == 0:
        return x
    a = x

    def bwd(g):
        a._accumulate(g[pad:-pad, pad:-pad, pad:-pad, :])

    data = np.pad(a.data, ((pad, pad), (pad, pad), (pad, pad), (0, 0)))
    return Tensor._make(data, (a,), bwd, "pad3d")


def bilinear_sample(fmap: Tensor, u, v, mask) -> Tensor:
    """Bilinearly sample an (H, W, C) map at subpixel (u, v); masked rows are zero.

    u runs along W, v along H, pixel centers at integer coordinates. Entries
    where mask is False contribute nothing and receive no gradient.
    """
    H, W, C = fmap.shape
    u = np.asarray(u, dtype=np.float32).reshape(-1)
    v = np.asarray(v, dtype=np.float32).reshape(-1)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if u.shape != v.shape or u.shape != mask.shape:
        raise ShapeMismatch("u, v, mask must have identical lengths")

    x0 = np.clip(np.floor(u).astype(np.int64), 0, W - 1)
    y0 = np.clip(np.floor(v).astype(np.int64), 0, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = (u - x0.astype(np.float32)) * mask
    wy = (v - y0.astype(np.float32)) * mask
    one = np.float32(1.0)
    w00 = ((one - wy) * (one - wx) * mask)[:, None]
    w01 = ((one - wy) * wx * mask)[:, None]
    w10 = (wy * (one - wx) * mask)[:, None]
    w11 = (wy * wx * mask)[:, None]

    f = fmap.data
    out = w00 * f[y0, x0] + w01 * f[y0, x1] + w10 * f[y1, x0] + w11 * f[y1, x1]

    def bwd(g):
        if fmap.grad is None:
            fmap.grad = np.zeros_like(fmap.data)
        np.add.at(fmap.grad, (y0, x0), w00 * g)
        np.add.at(fmap.grad, (y0, x1), w01 * g)
        np.add.at(fmap.grad, (y1, x0), w10 * g)
        np.add.at(fmap.grad, (y1, x1), w11 * g)

    return Tensor._make(out, (fmap,), bwd, "bilinear_sample")
