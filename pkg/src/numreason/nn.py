"""Small neural-net layer library on top of the autodiff core.

Parameters are initialized uniform(-1/sqrt(d), 1/sqrt(d)) from an explicit
numpy Generator, so a fixed seed yields bit-identical models.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Module:
    """Base class with recursive named-parameter discovery."""

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{full}.{i}", item

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.W = uniform_init(rng, (d_in, d_out), d_in)
        self.b = uniform_init(rng, (d_out,), d_in)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.matmul(x, self.W) + self.b


class SelfAttentionLayer(Module):
    """Single-head self-attention + Elu MLP, both with residual connections.

    Accepts (m, d) or batched (B, m, d) inputs.
    """

    def __init__(self, d: int, rng: np.random.Generator):
        self.d = d
        self.wq = Linear(d, d, rng)
        self.wk = Linear(d, d, rng)
        self.wv = Linear(d, d, rng)
        self.wo = Linear(d, d, rng)
        self.ff1 = Linear(d, d, rng)
        self.ff2 = Linear(d, d, rng)

    def __call__(self, x, dropout_rate=0.0, rng=None, training=False):
        q, k, v = self.wq(x), self.wk(x), self.wv(x)
        scores = ad.matmul(q, ad.swap_last(k)) * (1.0 / math.sqrt(self.d))
        attn = ad.softmax(scores, axis=-1)
        h = self.wo(ad.matmul(attn, v))
        h = ad.dropout(h, dropout_rate, rng, training)
        x = x + h
        f = self.ff2(ad.elu(self.ff1(x)))
        f = ad.dropout(f, dropout_rate, rng, training)
        return x + f


class Transformer(Module):
    """L stacked self-attention layers over an input projected to width d."""

    def __init__(self, d_in: int, d: int, n_layers: int, rng: np.random.Generator):
        self.proj = Linear(d_in, d, rng)
        self.layers = [SelfAttentionLayer(d, rng) for _ in range(n_layers)]

    def __call__(self, x, dropout_rate=0.0, rng=None, training=False):
        h = self.proj(x)
        for layer in self.layers:
            h = layer(h, dropout_rate, rng, training)
        return h


class Conv1d3(Module):
    """Width-3 1-D convolution along the sequence axis, zero-padded edges."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.wl = uniform_init(rng, (d_in, d_out), 3 * d_in)
        self.wc = uniform_init(rng, (d_in, d_out), 3 * d_in)
        self.wr = uniform_init(rng, (d_in, d_out), 3 * d_in)
        self.b = uniform_init(rng, (d_out,), 3 * d_in)

    def __call__(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        zero = Tensor(np.zeros((1, x.shape[1])))
        left = ad.concat([zero, x], axis=0)[:n]
        right = ad.concat([x, zero], axis=0)[1:]
        return (ad.matmul(left, self.wl) + ad.matmul(x, self.wc)
                + ad.matmul(right, self.wr) + self.b)


def sinusoidal_positions(m: int, d: int) -> np.ndarray:
    pos = np.arange(m, dtype=np.float64)[:, None]
    i = np.arange(d, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (i // 2)) / d)
    enc = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return enc
