import math

import numpy as np
import pytest

from oracles import naive_conv2d, naive_conv3d

from cribwatch.tensor import (
    AdamState,
    adam_step,
    avgpool,
    conv2d,
    conv3d,
    cross_entropy,
    maxpool3d,
    relu,
    sigmoid,
    softmax,
    tanh,
)


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((1, 3, 3))
        out = conv2d(x, np.ones((1, 1, 1, 1)), padding="same")
        np.testing.assert_array_equal(out, x)

    def test_ones_2x2_valid(self):
        # naive quadruple-loop oracle gives 4.0 in every cell
        x = np.ones((1, 3, 3))
        k = np.ones((1, 1, 2, 2))
        expected = naive_conv2d(x, k, padding="valid")
        np.testing.assert_array_equal(expected, np.full((1, 2, 2), 4.0))
        np.testing.assert_allclose(conv2d(x, k, padding="valid"), expected, atol=1e-12)

    def test_zero_kernel(self, rng):
        x = rng.standard_normal((2, 4, 5))
        out = conv2d(x, np.zeros((3, 2, 3, 3)), padding="same")
        np.testing.assert_array_equal(out, np.zeros((3, 4, 5)))

    def test_channel_mismatch_raises(self, rng):
        with pytest.raises(ValueError, match="channels"):
            conv2d(rng.standard_normal((2, 4, 4)), rng.standard_normal((1, 3, 3, 3)))

    def test_valid_kernel_too_large(self, rng):
        with pytest.raises(ValueError, match="exceeds"):
            conv2d(rng.standard_normal((1, 2, 2)), np.ones((1, 1, 3, 3)), padding="valid")

    def test_matches_naive_oracle(self, rng, backend_name):
        from cribwatch.backend import get_backend
        import cribwatch.tensor.ops as ops

        mod = get_backend(backend_name)
        old = ops.kernels
        ops.kernels = mod
        try:
            for _ in range(8):
                ci, co = rng.integers(1, 4, 2)
                h, w = rng.integers(3, 9, 2)
                kh, kw = rng.integers(1, 4, 2)
                pad = rng.choice(["same", "valid"])
                if pad == "valid":
                    kh, kw = min(kh, h), min(kw, w)
                x = rng.standard_normal((ci, h, w))
                k = rng.standard_normal((co, ci, kh, kw))
                np.testing.assert_allclose(
                    conv2d(x, k, padding=pad), naive_conv2d(x, k, pad), atol=1e-12
                )
        finally:
            ops.kernels = old


class TestConv3d:
    def test_identity(self, rng):
        x = rng.standard_normal((2, 4, 5, 6))
        out = conv3d(x, np.eye(2).reshape(2, 2, 1, 1, 1), stride=(1, 1, 1))
        np.testing.assert_allclose(out, x, atol=1e-15)

    def test_cube_ones_valid(self):
        x = np.ones((1, 2, 2, 2))
        k = np.ones((1, 1, 2, 2, 2))
        expected = naive_conv3d(x, k, (1, 1, 1), "valid")
        assert expected.shape == (1, 1, 1, 1) and expected[0, 0, 0, 0] == 8.0
        np.testing.assert_allclose(conv3d(x, k, stride=(1, 1, 1), padding="valid"), expected)

    def test_stride_same_shape(self, rng):
        # shape formula: same padding, spatial stride 2 halves 8 -> 4
        x = rng.standard_normal((3, 6, 8, 8))
        k = rng.standard_normal((4, 3, 3, 3, 3))
        out = conv3d(x, k, stride=(1, 2, 2), padding="same")
        assert out.shape == (4, 6, 4, 4)

    def test_matches_naive_oracle(self, rng, backend_name):
        from cribwatch.backend import get_backend
        import cribwatch.tensor.ops as ops

        mod = get_backend(backend_name)
        old = ops.kernels
        ops.kernels = mod
        try:
            for _ in range(6):
                ci = int(rng.integers(1, 5))
                co = int(rng.integers(1, 5))
                t = int(rng.integers(2, 9))
                h, w = (int(v) for v in rng.integers(3, 9, 2))
                kt, kh, kw = (int(v) for v in rng.integers(1, 4, 3))
                stride = tuple(int(v) for v in rng.integers(1, 3, 3))
                pad = str(rng.choice(["same", "valid"]))
                if pad == "valid":
                    kt, kh, kw = min(kt, t), min(kh, h), min(kw, w)
                x = rng.standard_normal((ci, t, h, w))
                k = rng.standard_normal((co, ci, kt, kh, kw))
                np.testing.assert_allclose(
                    conv3d(x, k, stride=stride, padding=pad),
                    naive_conv3d(x, k, stride, pad),
                    atol=1e-12,
                )
        finally:
            ops.kernels = old

    def test_bias_adds_per_channel(self, rng):
        x = rng.standard_normal((1, 2, 3, 3))
        k = np.zeros((2, 1, 1, 1, 1))
        out = conv3d(x, k, bias=np.array([1.5, -2.0]))
        assert np.all(out[0] == 1.5) and np.all(out[1] == -2.0)


class TestPooling:
    def test_constant_input(self):
        x = np.full((2, 4, 4, 4), 3.25)
        np.testing.assert_array_equal(maxpool3d(x, (2, 2, 2)), np.full((2, 2, 2, 2), 3.25))
        np.testing.assert_array_equal(avgpool(x, (2, 2, 2)), np.full((2, 2, 2, 2), 3.25))

    def test_single_max_location(self, rng):
        # loop oracle: place one spike, the containing window must report it
        x = rng.uniform(0.0, 0.5, (1, 4, 4, 4))
        x[0, 3, 1, 2] = 9.0
        out = maxpool3d(x, (2, 2, 2))
        assert out[0, 1, 0, 1] == 9.0
        assert (out <= 9.0).all()

    def test_global_average(self):
        x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)
        assert avgpool(x, (4, 1, 1))[0, 0, 0, 0] == 2.5

    def test_output_within_input_range(self, rng, backend_name):
        from cribwatch.backend import get_backend
        import cribwatch.tensor.ops as ops

        mod = get_backend(backend_name)
        old = ops.kernels
        ops.kernels = mod
        try:
            for _ in range(10):
                shape = (int(rng.integers(1, 4)), *(int(v) for v in rng.integers(2, 7, 3)))
                window = tuple(min(int(v), shape[i + 1]) for i, v in enumerate(rng.integers(1, 4, 3)))
                x = rng.standard_normal(shape)
                for pooled in (maxpool3d(x, window), avgpool(x, window)):
                    assert pooled.min() >= x.min() - 1e-15
                    assert pooled.max() <= x.max() + 1e-15
        finally:
            ops.kernels = old

    def test_window_too_large(self):
        with pytest.raises(ValueError, match="window"):
            maxpool3d(np.zeros((1, 2, 2, 2)), (3, 1, 1))


class TestActivations:
    def test_fixed_points(self):
        assert sigmoid(np.zeros(1))[0] == 0.5
        assert tanh(np.zeros(1))[0] == 0.0
        np.testing.assert_allclose(softmax(np.zeros(5)), np.full(5, 0.2))

    def test_relu(self):
        x = np.array([-2.0, 0.0, 3.5])
        np.testing.assert_array_equal(relu(x), [0.0, 0.0, 3.5])

    def test_softmax_distribution(self, rng):
        for _ in range(20):
            y = softmax(rng.standard_normal(int(rng.integers(2, 12))) * 5)
            assert (y >= 0).all()
            assert abs(y.sum() - 1.0) < 1e-12

    def test_softmax_shift_invariance(self, rng):
        for _ in range(20):
            x = rng.standard_normal(7) * 3
            shift = float(rng.uniform(-50, 50))
            np.testing.assert_allclose(softmax(x), softmax(x + shift), atol=1e-9)


class TestCrossEntropy:
    def test_perfect_prediction(self):
        t = np.array([0.0, 1.0, 0.0])
        assert cross_entropy(t, t) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_five(self):
        p = np.full(5, 0.2)
        t = np.zeros(5)
        t[2] = 1.0
        assert cross_entropy(p, t) == pytest.approx(math.log(5), abs=1e-12)

    def test_matches_formula_oracle(self, rng):
        for _ in range(10):
            p = rng.uniform(0.05, 1.0, 6)
            p /= p.sum()
            t = np.zeros(6)
            t[rng.integers(0, 6)] = 1.0
            expected = -sum(ti * math.log(max(pi, 1e-12)) for ti, pi in zip(t, p))
            assert cross_entropy(p, t) == pytest.approx(expected, rel=1e-12)


class TestAdam:
    def test_zero_grad_no_change(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params, lr=0.1)
        before = params["w"].copy()
        adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["w"], before)

    def test_single_step_hand_evaluated(self):
        # m=0.1, v=0.001; mhat=1, vhat=1 -> delta = lr/(1+eps) ~= 0.1
        params = {"p": np.array([0.0])}
        state = AdamState.for_params(params, lr=0.1)
        adam_step(params, {"p": np.array([1.0])}, state)
        assert params["p"][0] == pytest.approx(-0.1, abs=1e-8)

    def test_step_counter(self):
        params = {"p": np.zeros(1)}
        state = AdamState.for_params(params)
        assert state.step == 0
        adam_step(params, {"p": np.ones(1)}, state)
        assert state.step == 1
        adam_step(params, {"p": np.ones(1)}, state)
        assert state.step == 2

    def test_frozen_params_untouched(self):
        params = {"a": np.ones(3), "b": np.ones(3)}
        state = AdamState.for_params(params, lr=0.5)
        adam_step(params, {"a": np.ones(3), "b": np.ones(3)}, state, frozen={"b"})
        assert (params["a"] != 1.0).all()
        np.testing.assert_array_equal(params["b"], np.ones(3))
