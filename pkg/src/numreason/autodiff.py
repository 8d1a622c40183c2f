"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Every forward op registers a closed-over backward rule; calling
``backward()`` on a scalar node accumulates gradients into all reachable
tensors created with ``requires_grad=True``. All computation is 64-bit so
finite-difference checks and determinism contracts are crisp.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    # sum away leading extra dims
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An ndarray node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = parents
        self._backward = backward

    # -- basics -------------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph --------------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / float(other))

    def __getitem__(self, idx):
        return gather(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _track(*ts) -> bool:
    return any(t.requires_grad or t._backward is not None for t in ts)


def _node(data, parents, backward):
    if any(p.requires_grad or p._backward is not None for p in parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data * b.data

    def bwd(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), bwd)


def reciprocal(a) -> Tensor:
    a = _lift(a)
    out = 1.0 / a.data

    def bwd(g):
        return (-g * out * out,)

    return _node(out, (a,), bwd)


def log(a) -> Tensor:
    a = _lift(a)
    out = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _node(out, (a,), bwd)


def exp(a) -> Tensor:
    a = _lift(a)
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _node(out, (a,), bwd)


def elu(a, alpha=1.0) -> Tensor:
    a = _lift(a)
    neg = a.data < 0
    out = np.where(neg, alpha * (np.exp(np.minimum(a.data, 0.0)) - 1.0), a.data)

    def bwd(g):
        return (g * np.where(neg, out + alpha, 1.0),)

    return _node(out, (a,), bwd)


def prelu(a, slope: Tensor) -> Tensor:
    """PRelu with a scalar learnable slope for the negative part."""
    a, slope = _lift(a), _lift(slope)
    neg = a.data < 0
    out = np.where(neg, slope.data * a.data, a.data)

    def bwd(g):
        da = g * np.where(neg, slope.data, 1.0)
        ds = _unbroadcast(g * np.where(neg, a.data, 0.0), slope.data.shape)
        return da, ds

    return _node(out, (a, slope), bwd)


# -- reductions & shape -----------------------------------------------------


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _lift(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _node(out, (a,), bwd)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _lift(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tmax(a, axis) -> Tensor:
    """Max along an axis; gradient flows to the first argmax (deterministic)."""
    a = _lift(a)
    out = a.data.max(axis=axis)
    idx = a.data.argmax(axis=axis)

    def bwd(g):
        grad = np.zeros_like(a.data)
        expanded = np.expand_dims(idx, axis)
        np.put_along_axis(grad, expanded, np.expand_dims(g, axis), axis)
        return (grad,)

    return _node(out, (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    out = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(a.data.shape),)

    return _node(out, (a,), bwd)


def transpose(a, axes=None) -> Tensor:
    a = _lift(a)
    out = a.data.transpose(axes)

    def bwd(g):
        if axes is None:
            return (g.transpose(),)
        inv = np.argsort(axes)
        return (g.transpose(inv),)

    return _node(out, (a,), bwd)


def swap_last(a) -> Tensor:
    """Transpose the last two axes (batched matrix transpose)."""
    a = _lift(a)
    out = np.swapaxes(a.data, -1, -2)

    def bwd(g):
        return (np.swapaxes(g, -1, -2),)

    return _node(out, (a,), bwd)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tuple(tensors), bwd)


def gather(a, idx) -> Tensor:
    """Numpy-style indexing with gradient scatter-add."""
    a = _lift(a)
    out = a.data[idx]

    def bwd(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return _node(out, (a,), bwd)


# -- linear algebra ---------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.shape[-1] != b.data.shape[0 if b.data.ndim == 1 else -2]:
        raise ShapeMismatch(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if bd.ndim == 1:
            ga = np.expand_dims(g, -1) * bd
            gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ np.expand_dims(g, -1),
                              (bd.shape[0], 1)).reshape(bd.shape)
            return _unbroadcast(ga, ad.shape), gb
        if ad.ndim == 1:
            ga = np.expand_dims(g, -2) @ np.swapaxes(bd, -1, -2)
            ga = _unbroadcast(ga, (1, ad.shape[0])).reshape(ad.shape)
            gb = _unbroadcast(np.expand_dims(ad, -1) * np.expand_dims(g, -2), bd.shape)
            return ga, gb
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return _node(out, (a, b), bwd)


def softmax(a, axis=-1) -> Tensor:
    a = _lift(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _node(out, (a,), bwd)


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate == 0."""
    a = _lift(a)
    if not training or rate <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, mask)
