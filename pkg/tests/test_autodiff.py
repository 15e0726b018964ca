"""Per-op gradient checks for the tape against central differences."""

import numpy as np

from tokmerge import autodiff as ad
from tokmerge.rng import Rng


def central_difference(fn, arrays, which, flat, h=1e-6):
    plus = [a.copy() for a in arrays]
    minus = [a.copy() for a in arrays]
    plus[which].flat[flat] += h
    minus[which].flat[flat] -= h
    return (fn(plus) - fn(minus)) / (2 * h)


def check_gradients(build, arrays, h=1e-6, tol=1e-6):
    """build(list of Vars) -> scalar Var; compares every coordinate."""

    def value(arrs):
        return float(build([ad.Var(a) for a in arrs]).value)

    leaves = [ad.Var(a) for a in arrays]
    root = build(leaves)
    ad.backward(root)
    for which, leaf in enumerate(leaves):
        grad = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        for flat in range(leaf.value.size):
            cd = central_difference(value, arrays, which, flat, h)
            assert abs(grad.flat[flat] - cd) < tol, f"leaf {which} coord {flat}"


def test_matmul_chain():
    rng = Rng(1)
    a = rng.normal(6).reshape(2, 3)
    b = rng.normal(12).reshape(3, 4)
    t = rng.normal(8).reshape(2, 4)
    check_gradients(lambda v: ad.sse(ad.matmul(v[0], v[1]), t), [a, b])


def test_matmul_nt():
    rng = Rng(2)
    a = rng.normal(8).reshape(2, 4)
    b = rng.normal(12).reshape(3, 4)
    t = rng.normal(6).reshape(2, 3)
    check_gradients(lambda v: ad.sse(ad.matmul_nt(v[0], v[1]), t), [a, b])


def test_add_and_bias_row():
    rng = Rng(3)
    a = rng.normal(6).reshape(2, 3)
    b = rng.normal(6).reshape(2, 3)
    bias = rng.normal(3)
    t = rng.normal(6).reshape(2, 3)
    check_gradients(lambda v: ad.sse(ad.add_row(ad.add(v[0], v[1]), v[2]), t), [a, b, bias])


def test_tanh_and_scale():
    rng = Rng(4)
    a = rng.normal(6).reshape(2, 3)
    t = rng.normal(6).reshape(2, 3)
    check_gradients(lambda v: ad.sse(ad.tanh(ad.scale(v[0], 1.7)), t), [a])


def test_causal_softmax_gradients():
    rng = Rng(5)
    scores = rng.normal(16).reshape(4, 4)
    t = rng.normal(16).reshape(4, 4)
    check_gradients(lambda v: ad.sse(ad.causal_softmax(v[0]), t), [scores], tol=1e-5)


def test_causal_softmax_masks_future():
    p = ad.causal_softmax(ad.Var(Rng(6).normal(9).reshape(3, 3))).value
    assert p[0, 1] == 0.0 and p[0, 2] == 0.0 and p[1, 2] == 0.0
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_slice_and_concat():
    rng = Rng(7)
    a = rng.normal(8).reshape(2, 4)
    t = rng.normal(8).reshape(2, 4)

    def build(v):
        left = ad.slice_cols(v[0], 0, 2)
        right = ad.slice_cols(v[0], 2, 4)
        return ad.sse(ad.concat_cols([ad.scale(left, 2.0), right]), t)

    check_gradients(build, [a])


def test_slice_rows():
    rng = Rng(8)
    a = rng.normal(12).reshape(4, 3)
    t = rng.normal(6).reshape(2, 3)
    check_gradients(lambda v: ad.sse(ad.slice_rows(v[0], 2), t), [a])


def test_shared_leaf_accumulates():
    a = np.array([[2.0]])
    leaf = ad.Var(a)
    root = ad.sse(ad.add(ad.matmul(leaf, leaf), leaf), np.array([[0.0]]))
    ad.backward(root)
    # f = (a^2 + a)^2, df/da = 2 (a^2 + a)(2a + 1) = 2 * 6 * 5 = 60
    assert abs(leaf.grad[0, 0] - 60.0) < 1e-9


def test_composite_expression_matches_fd():
    rng = Rng(9)
    x = rng.normal(12).reshape(3, 4)
    w = rng.normal(16).reshape(4, 4)
    t = rng.normal(12).reshape(3, 4)

    def build(v):
        h = ad.tanh(ad.matmul(v[0], v[1]))
        p = ad.causal_softmax(ad.matmul_nt(h, h))
        return ad.sse(ad.matmul(p, v[0]), t)

    check_gradients(build, [x, w], tol=1e-5)
