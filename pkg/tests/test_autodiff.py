"""Finite-difference verification of the reverse-mode core."""

import numpy as np
import pytest

from numreason import autodiff as ad
from numreason.autodiff import Tensor

RNG = np.random.default_rng(7)


def numeric_grad(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar-valued fn at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fn(x)
        flat[i] = orig - h
        lo = fn(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def check(build, shape, rtol=1e-6, atol=1e-8):
    x = RNG.normal(size=shape)
    t = Tensor(x.copy(), requires_grad=True)
    build(t).backward()
    num = numeric_grad(lambda a: build(Tensor(a)).item(), x.copy())
    np.testing.assert_allclose(t.grad, num, rtol=rtol, atol=atol)


def test_add_mul_broadcast():
    b = Tensor(RNG.normal(size=(3,)), requires_grad=True)
    check(lambda t: ((t + b) * t).sum(), (2, 3))
    b.zero_grad()
    ((Tensor(np.ones((2, 3))) + b) * 2.0).sum().backward()
    np.testing.assert_allclose(b.grad, np.full(3, 4.0))


def test_elementwise_ops():
    check(lambda t: ad.log(ad.exp(t) + 3.0).sum(), (4,))
    check(lambda t: ad.reciprocal(t * t + 1.0).sum(), (5,))
    check(lambda t: ad.elu(t).sum(), (7,))


def test_prelu_slope_grad():
    slope = Tensor(np.array(0.3), requires_grad=True)
    x = Tensor(np.array([-2.0, 1.0, -0.5]), requires_grad=True)
    ad.prelu(x, slope).sum().backward()
    np.testing.assert_allclose(slope.grad, -2.5)
    np.testing.assert_allclose(x.grad, [0.3, 1.0, 0.3])


def test_reductions():
    check(lambda t: t.sum(axis=0).sum() * 0.5 + t.mean(), (3, 4))
    check(lambda t: ad.tmax(t, axis=1).sum(), (3, 4))


def test_tmax_first_argmax_tiebreak():
    t = Tensor(np.array([[1.0, 1.0]]), requires_grad=True)
    ad.tmax(t, axis=1).sum().backward()
    np.testing.assert_allclose(t.grad, [[1.0, 0.0]])


def test_shape_ops():
    check(lambda t: (t.reshape(6) * np.arange(6)).sum(), (2, 3))
    check(lambda t: (ad.swap_last(t) * RNG_FIXED).sum(), (2, 3))
    check(lambda t: ad.concat([t, t * 2.0], axis=0).sum(), (2, 2))


RNG_FIXED = np.random.default_rng(0).normal(size=(3, 2))


def test_gather_scatter_add():
    t = Tensor(np.arange(4.0), requires_grad=True)
    idx = np.array([0, 0, 3])
    t[idx].sum().backward()
    np.testing.assert_allclose(t.grad, [2.0, 0.0, 0.0, 1.0])


@pytest.mark.parametrize("sa,sb", [
    ((3, 4), (4, 2)),
    ((4,), (4, 2)),
    ((3, 4), (4,)),
    ((4,), (4,)),
    ((5, 3, 4), (4, 2)),
    ((5, 3, 4), (5, 4, 2)),
    ((4,), (5, 4, 2)),
])
def test_matmul_shapes(sa, sb):
    a = RNG.normal(size=sa)
    b0 = Tensor(RNG.normal(size=sb), requires_grad=True)
    ta = Tensor(a.copy(), requires_grad=True)
    (ad.matmul(ta, b0) * 1.3).sum().backward()
    num_a = numeric_grad(lambda x: (ad.matmul(Tensor(x), b0) * 1.3).sum().item(),
                         a.copy())
    np.testing.assert_allclose(ta.grad, num_a, rtol=1e-6, atol=1e-8)
    num_b = numeric_grad(lambda x: (ad.matmul(Tensor(a), Tensor(x)) * 1.3).sum().item(),
                         b0.data.copy())
    np.testing.assert_allclose(b0.grad, num_b, rtol=1e-6, atol=1e-8)


def test_matmul_shape_mismatch():
    with pytest.raises(ad.ShapeMismatch):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_softmax_grad_and_rows():
    check(lambda t: (ad.softmax(t, axis=-1) * RNG_FIXED.T).sum(), (2, 3))
    s = ad.softmax(Tensor(RNG.normal(size=(4, 6)) * 30.0), axis=1)
    np.testing.assert_allclose(s.data.sum(axis=1), np.ones(4), atol=1e-12)


def test_dropout_modes():
    x = Tensor(np.ones((100,)), requires_grad=True)
    assert ad.dropout(x, 0.5, None, training=False) is x
    rng = np.random.default_rng(3)
    y = ad.dropout(x, 0.5, rng, training=True)
    assert set(np.unique(y.data)) <= {0.0, 2.0}


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_grad_accumulates_over_reuse():
    t = Tensor(np.array(2.0), requires_grad=True)
    (t * t + t).backward()
    np.testing.assert_allclose(t.grad, 5.0)
