"""Finite-difference checks for every backward pass in the tensor module.

Central differences with h=1e-5; error metric is |a-n| / max(1,|a|) per the
acceptance gate (< 1e-5). Inputs are nudged away from relu kinks and pooling
ties, where the derivative genuinely does not exist.
"""

import numpy as np
import pytest

from oracles import central_diff, max_rel_err

from cribwatch.tensor import (
    avgpool,
    avgpool_backward,
    conv2d,
    conv2d_backward,
    conv3d,
    conv3d_backward,
    cross_entropy,
    cross_entropy_backward,
    dense,
    dense_backward,
    maxpool3d,
    maxpool3d_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
)

TOL = 1e-5


def _away_from_zero(x, margin=1e-2):
    return np.where(np.abs(x) < margin, x + np.sign(x + 0.5) * margin, x)


class TestConvGradients:
    @pytest.mark.parametrize("seed", range(6))
    def test_conv3d_random_configs(self, seed):
        rng = np.random.default_rng(seed)
        ci, co = (int(v) for v in rng.integers(1, 4, 2))
        t, h, w = (int(v) for v in rng.integers(2, 6, 3))
        kt, kh, kw = (int(v) for v in rng.integers(1, 4, 3))
        stride = tuple(int(v) for v in rng.integers(1, 3, 3))
        pad = str(rng.choice(["same", "valid"]))
        if pad == "valid":
            kt, kh, kw = min(kt, t), min(kh, h), min(kw, w)
        x = rng.standard_normal((ci, t, h, w))
        k = rng.standard_normal((co, ci, kt, kh, kw))
        b = rng.standard_normal(co)
        up = rng.standard_normal(conv3d(x, k, b, stride, pad).shape)

        def loss():
            return float(np.sum(up * conv3d(x, k, b, stride, pad)))

        gx, gk, gb = conv3d_backward(x, k, up, stride, pad)
        assert max_rel_err(gx, central_diff(loss, x)) < TOL
        assert max_rel_err(gk, central_diff(loss, k)) < TOL
        assert max_rel_err(gb, central_diff(loss, b)) < TOL

    @pytest.mark.parametrize("seed", range(3))
    def test_conv2d_random_configs(self, seed):
        rng = np.random.default_rng(100 + seed)
        ci, co = (int(v) for v in rng.integers(1, 4, 2))
        h, w = (int(v) for v in rng.integers(3, 7, 2))
        kh, kw = (int(v) for v in rng.integers(1, 4, 2))
        pad = str(rng.choice(["same", "valid"]))
        x = rng.standard_normal((ci, h, w))
        k = rng.standard_normal((co, ci, kh, kw))
        up = rng.standard_normal(conv2d(x, k, padding=pad).shape)

        def loss():
            return float(np.sum(up * conv2d(x, k, padding=pad)))

        gx, gk, _gb = conv2d_backward(x, k, up, pad)
        assert max_rel_err(gx, central_diff(loss, x)) < TOL
        assert max_rel_err(gk, central_diff(loss, k)) < TOL

    def test_zero_upstream_gives_zero_grads(self, rng):
        x = rng.standard_normal((2, 3, 4, 4))
        k = rng.standard_normal((3, 2, 2, 2, 2))
        gx, gk, gb = conv3d_backward(x, k, np.zeros((3, 3, 4, 4)), (1, 1, 1), "same")
        assert not gx.any() and not gk.any() and not gb.any()


class TestPoolGradients:
    @pytest.mark.parametrize("seed", range(4))
    def test_maxpool(self, seed):
        rng = np.random.default_rng(200 + seed)
        shape = (int(rng.integers(1, 3)), *(int(v) for v in rng.integers(2, 6, 3)))
        window = tuple(min(int(v), shape[i + 1]) for i, v in enumerate(rng.integers(1, 3, 3)))
        # distinct values avoid argmax ties, where the derivative is undefined
        x = rng.permutation(np.arange(np.prod(shape), dtype=float)).reshape(shape)
        x += rng.uniform(0.1, 0.2)
        up = rng.standard_normal(maxpool3d(x, window).shape)

        def loss():
            return float(np.sum(up * maxpool3d(x, window)))

        gx = maxpool3d_backward(x, up, window)
        assert max_rel_err(gx, central_diff(loss, x)) < TOL

    @pytest.mark.parametrize("seed", range(4))
    def test_avgpool(self, seed):
        rng = np.random.default_rng(300 + seed)
        shape = (int(rng.integers(1, 3)), *(int(v) for v in rng.integers(2, 6, 3)))
        window = tuple(min(int(v), shape[i + 1]) for i, v in enumerate(rng.integers(1, 3, 3)))
        x = rng.standard_normal(shape)
        up = rng.standard_normal(avgpool(x, window).shape)

        def loss():
            return float(np.sum(up * avgpool(x, window)))

        gx = avgpool_backward(x.shape, up, window)
        assert max_rel_err(gx, central_diff(loss, x)) < TOL


class TestElementwiseGradients:
    @pytest.mark.parametrize("seed", range(4))
    def test_sigmoid_tanh(self, seed):
        rng = np.random.default_rng(400 + seed)
        x = rng.standard_normal(17) * 2
        up = rng.standard_normal(17)
        for fwd, bwd in ((sigmoid, sigmoid_backward), (tanh, tanh_backward)):
            def loss():
                return float(np.sum(up * fwd(x)))

            assert max_rel_err(bwd(up, fwd(x)), central_diff(loss, x)) < TOL

    def test_relu_gradient(self, rng):
        x = _away_from_zero(rng.standard_normal(25))
        up = rng.standard_normal(25)

        def loss():
            return float(np.sum(up * relu(x)))

        assert max_rel_err(relu_backward(up, relu(x)), central_diff(loss, x)) < TOL

    def test_relu_zero_for_negatives(self):
        x = np.array([-3.0, -0.5, 1.0])
        g = relu_backward(np.ones(3), relu(x))
        np.testing.assert_array_equal(g, [0.0, 0.0, 1.0])

    @pytest.mark.parametrize("seed", range(4))
    def test_softmax(self, seed):
        rng = np.random.default_rng(500 + seed)
        x = rng.standard_normal(9)
        up = rng.standard_normal(9)

        def loss():
            return float(np.sum(up * softmax(x)))

        assert max_rel_err(softmax_backward(up, softmax(x)), central_diff(loss, x)) < TOL

    @pytest.mark.parametrize("seed", range(4))
    def test_cross_entropy(self, seed):
        rng = np.random.default_rng(600 + seed)
        p = rng.uniform(0.05, 0.95, 8)
        t = np.zeros(8)
        t[rng.integers(0, 8)] = 1.0

        def loss():
            return cross_entropy(p, t)

        assert max_rel_err(cross_entropy_backward(p, t), central_diff(loss, p)) < TOL

    @pytest.mark.parametrize("seed", range(4))
    def test_dense(self, seed):
        rng = np.random.default_rng(700 + seed)
        n, m = (int(v) for v in rng.integers(2, 9, 2))
        x = rng.standard_normal(n)
        w = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        up = rng.standard_normal(m)

        def loss():
            return float(np.sum(up * dense(x, w, b)))

        gx, gw, gb = dense_backward(x, w, up)
        assert max_rel_err(gx, central_diff(loss, x)) < TOL
        assert max_rel_err(gw, central_diff(loss, w)) < TOL
        assert max_rel_err(gb, central_diff(loss, b)) < TOL
