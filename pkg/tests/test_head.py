import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcsqcnn import rng as rngmod
from pcsqcnn.head import HeadParams, cross_entropy, head_forward, head_gradient, head_loss, init_head


def test_init_bounds_and_variance():
    h = init_head(4, 10, rngmod.stream(0, "h"))
    assert np.all(np.abs(h.W) < 0.5) and np.all(np.abs(h.b) < 0.5)
    big = init_head(16, 10**5 // 16, rngmod.stream(0, "v"))
    assert big.W.var() == pytest.approx(1 / (3 * 16), rel=0.05)


def test_init_deterministic_and_validated():
    a = init_head(8, 10, rngmod.stream(5, "h"))
    b = init_head(8, 10, rngmod.stream(5, "h"))
    assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
    with pytest.raises(ValueError):
        init_head(8, 1, rngmod.stream(0, "h"))


def test_forward_examples():
    h0 = HeadParams(np.zeros((10, 4)), np.zeros(10))
    np.testing.assert_allclose(head_forward(np.ones(4) / 4, h0), 0.1)
    h = HeadParams(np.zeros((2, 1)), np.array([np.log(3.0), 0.0]))
    np.testing.assert_allclose(head_forward(np.array([1.0]), h), [0.75, 0.25], atol=1e-15)
    shifted = HeadParams(h.W, h.b + 17.0)
    np.testing.assert_allclose(head_forward(np.array([1.0]), shifted), [0.75, 0.25], atol=1e-15)
    with pytest.raises(ValueError):
        head_forward(np.ones(3), h0)


def test_cross_entropy_examples():
    assert cross_entropy(np.full(10, 0.1), 4) == pytest.approx(np.log(10))
    assert cross_entropy(np.array([0.75, 0.25]), 1) == pytest.approx(np.log(4))
    assert cross_entropy(np.array([1 - 1e-12, 1e-12]), 0) < 1e-11


def test_gradient_zero_at_one_hot():
    # huge margin: q = e_c to machine precision
    W = np.zeros((3, 2))
    h = HeadParams(W, np.array([800.0, 0.0, 0.0]))
    dW, db, dp = head_gradient(np.array([0.5, 0.5]), h, 0)
    assert not dW.any() and not db.any() and not dp.any()


def test_gradient_matches_finite_differences(rng):
    for _ in range(5):
        h = HeadParams(rng.standard_normal((5, 6)), rng.standard_normal(5))
        p = rng.dirichlet(np.ones(6))
        c = int(rng.integers(5))
        dW, db, dp = head_gradient(p, h, c)
        eps = 1e-6
        for i in range(6):
            e = np.eye(6)[i] * eps
            fd = (head_loss(p + e, h, c) - head_loss(p - e, h, c)) / (2 * eps)
            assert dp[i] == pytest.approx(fd, rel=1e-6, abs=1e-10)
        for j in range(5):
            e = np.eye(5)[j] * eps
            fd = (head_loss(p, HeadParams(h.W, h.b + e), c) - head_loss(p, HeadParams(h.W, h.b - e), c)) / (2 * eps)
            assert db[j] == pytest.approx(fd, rel=1e-6, abs=1e-10)


def test_batched_gradient_matches_single(rng):
    h = HeadParams(rng.standard_normal((4, 3)), rng.standard_normal(4))
    P = rng.dirichlet(np.ones(3), size=5)
    c = rng.integers(4, size=5)
    dW, db, dp = head_gradient(P, h, c)
    for i in range(5):
        a, b, d = head_gradient(P[i], h, c[i])
        np.testing.assert_allclose(dW[i], a)
        np.testing.assert_allclose(dp[i], d)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_softmax_head_bound(seed):
    g = np.random.default_rng(seed)
    h = HeadParams(g.standard_normal((10, 8)) * g.uniform(0.1, 5), g.standard_normal(10))
    p = g.dirichlet(np.ones(8))
    q = head_forward(p, h)
    assert np.all(q > 0) and q.sum() == pytest.approx(1.0, abs=1e-12)
    _, _, dp = head_gradient(p, h, int(g.integers(10)))
    assert dp @ dp <= 2 * np.linalg.norm(h.W, 2) ** 2 + 1e-12
    assert dp @ dp <= 2 * np.linalg.norm(h.W) ** 2 + 1e-12
