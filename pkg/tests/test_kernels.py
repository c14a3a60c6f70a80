"""Forward-kernel contracts: trivial identities, oracle equivalence, and the
elementwise properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birrnet import kernels
from birrnet.errors import ConfigError, DimensionError, StateError
from birrnet.kernels import BatchNormState, ConvParams
from birrnet.rng import make_rng

from oracles import (avg_pool_loops, conv2d_scalar, conv2d_windowed,
                     depthwise_windowed, dense_scalar, max_pool_loops)


class TestConv2d:
    def test_scaling_identity(self):
        x = np.ones((1, 3, 3, 1), dtype=np.float32)
        k = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
        out = kernels.conv2d(x, ConvParams(k, stride=1, padding="same"))
        assert out.shape == (1, 3, 3, 1)
        assert np.all(out == 2.0)

    def test_zero_kernel_annihilates(self):
        rng = make_rng(7)
        x = rng.normal(size=(2, 5, 4, 3)).astype(np.float32)
        k = np.zeros((3, 3, 3, 2), dtype=np.float32)
        out = kernels.conv2d(x, ConvParams(k, stride=2, padding="same"))
        assert out.shape == (2, 3, 2, 2)
        assert np.all(out == 0.0)

    def test_matches_scalar_loop_oracle(self):
        rng = make_rng(42)
        x = rng.normal(size=(2, 8, 8, 3)).astype(np.float32)
        k = rng.normal(size=(3, 3, 3, 4)).astype(np.float32)
        out = kernels.conv2d(x, ConvParams(k, stride=2, padding="same"))
        ref = conv2d_scalar(x, k, stride=2, padding="same")
        assert out.shape == ref.shape
        assert np.max(np.abs(out - ref)) < 1e-5

    def test_valid_padding_matches_oracle(self):
        rng = make_rng(43)
        x = rng.normal(size=(1, 7, 9, 2)).astype(np.float32)
        k = rng.normal(size=(3, 2, 2, 5)).astype(np.float32)
        out = kernels.conv2d(x, ConvParams(k, stride=1, padding="valid"))
        ref = conv2d_windowed(x, k, stride=1, padding="valid")
        assert out.shape == (1, 5, 8, 5)
        assert np.max(np.abs(out - ref)) < 1e-5

    def test_same_padding_output_size(self):
        for size, stride in [(8, 1), (8, 2), (7, 2), (5, 1)]:
            x = np.zeros((1, size, size, 1), dtype=np.float32)
            k = np.zeros((3, 3, 1, 1), dtype=np.float32)
            out = kernels.conv2d(x, ConvParams(k, stride=stride, padding="same"))
            expect = -(-size // stride)
            assert out.shape[1] == out.shape[2] == expect

    def test_channel_mismatch_names_both_shapes(self):
        x = np.zeros((1, 4, 4, 3), dtype=np.float32)
        k = np.zeros((3, 3, 2, 4), dtype=np.float32)
        with pytest.raises(DimensionError) as err:
            kernels.conv2d(x, ConvParams(k))
        assert "(1, 4, 4, 3)" in str(err.value)
        assert "(3, 3, 2, 4)" in str(err.value)

    def test_kernel_larger_than_valid_input(self):
        x = np.zeros((1, 2, 2, 1), dtype=np.float32)
        k = np.zeros((3, 3, 1, 1), dtype=np.float32)
        with pytest.raises(DimensionError):
            kernels.conv2d(x, ConvParams(k, padding="valid"))

    def test_deterministic(self):
        rng = make_rng(11)
        x = rng.normal(size=(2, 6, 6, 3)).astype(np.float32)
        k = rng.normal(size=(3, 3, 3, 4)).astype(np.float32)
        p = ConvParams(k, stride=1, padding="same")
        a = kernels.conv2d(x, p)
        b = kernels.conv2d(x, p)
        assert np.array_equal(a, b)


class TestDepthwiseConv2d:
    def test_delta_kernel_is_identity(self):
        rng = make_rng(5)
        x = rng.normal(size=(2, 6, 6, 4)).astype(np.float32)
        k = np.zeros((3, 3, 4, 1), dtype=np.float32)
        k[1, 1, :, 0] = 1.0
        out = kernels.depthwise_conv2d(x, ConvParams(k, stride=1, padding="same"))
        assert np.allclose(out, x, atol=1e-7)

    def test_channel_independence(self):
        rng = make_rng(6)
        x = np.zeros((1, 5, 5, 2), dtype=np.float32)
        x[:, :, :, 0] = 1.0
        k = rng.normal(size=(3, 3, 2, 1)).astype(np.float32)
        out = kernels.depthwise_conv2d(x, ConvParams(k, stride=1, padding="same"))
        assert np.all(out[:, :, :, 1] == 0.0)

    def test_matches_per_channel_oracle(self):
        rng = make_rng(44)
        x = rng.normal(size=(1, 6, 6, 4)).astype(np.float32)
        k = rng.normal(size=(3, 3, 4, 1)).astype(np.float32)
        out = kernels.depthwise_conv2d(x, ConvParams(k, stride=2, padding="same"))
        ref = depthwise_windowed(x, k, stride=2, padding="same")
        assert np.max(np.abs(out - ref)) < 1e-5

    def test_channel_mismatch(self):
        x = np.zeros((1, 4, 4, 3), dtype=np.float32)
        k = np.zeros((3, 3, 4, 1), dtype=np.float32)
        with pytest.raises(DimensionError):
            kernels.depthwise_conv2d(x, ConvParams(k))

    def test_multiplier_must_be_one(self):
        x = np.zeros((1, 4, 4, 3), dtype=np.float32)
        k = np.zeros((3, 3, 3, 2), dtype=np.float32)
        with pytest.raises(DimensionError):
            kernels.depthwise_conv2d(x, ConvParams(k))


class TestBatchNorm:
    def test_identity_parameters_infer(self):
        # inputs in [-1, 1], the normalized-image regime
        rng = make_rng(8)
        x = rng.uniform(-1, 1, size=(2, 4, 4, 3)).astype(np.float32)
        state = BatchNormState.identity(3, epsilon=1e-3)
        out = kernels.batchnorm(x, state, "infer")
        # only the epsilon inside the square root separates output from input
        assert np.max(np.abs(out - x)) < 1e-3

    def test_identity_parameters_epsilon_bound(self):
        # for arbitrary magnitudes the deviation is bounded by |x| * eps / 2
        rng = make_rng(21)
        x = rng.normal(scale=10.0, size=(2, 4, 4, 3)).astype(np.float32)
        eps = 1e-3
        out = kernels.batchnorm(x, BatchNormState.identity(3, epsilon=eps), "infer")
        bound = np.abs(x) * (eps / 2) + 1e-6
        assert np.all(np.abs(out - x) <= bound)

    def test_zero_gamma_broadcasts_beta(self):
        rng = make_rng(9)
        x = rng.normal(size=(2, 3, 3, 4)).astype(np.float32)
        state = BatchNormState.identity(4)
        state.gamma = np.zeros(4, dtype=np.float32)
        state.beta = np.arange(4, dtype=np.float32)
        out = kernels.batchnorm(x, state, "infer")
        assert np.allclose(out, np.broadcast_to(state.beta, out.shape))

    def test_train_mode_moments(self):
        rng = make_rng(10)
        x = rng.normal(loc=3.0, scale=2.0, size=(4, 2, 2, 1)).astype(np.float64)
        state = BatchNormState.identity(1, epsilon=1e-8, dtype=np.float64)
        state.gamma = np.array([1.5])
        state.beta = np.array([-0.5])
        out = kernels.batchnorm(x, state, "train")
        # recompute moments on the output: mean ~ beta, var ~ gamma^2
        assert abs(out.mean() - (-0.5)) < 1e-4
        assert abs(out.var() - 1.5 ** 2) < 1e-4

    def test_running_stat_update_rule(self):
        rng = make_rng(12)
        x = rng.normal(loc=1.0, size=(8, 2, 2, 2)).astype(np.float32)
        state = BatchNormState.identity(2, momentum=0.25)
        mean = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
        kernels.batchnorm(x, state, "train")
        assert np.allclose(state.running_mean, 0.25 * mean, atol=1e-6)
        assert np.allclose(state.running_var, 0.75 * 1.0 + 0.25 * var, atol=1e-6)

    def test_corrupt_running_var(self):
        x = np.zeros((1, 2, 2, 2), dtype=np.float32)
        state = BatchNormState.identity(2)
        state.running_var = np.array([1.0, 0.0], dtype=np.float32)
        with pytest.raises(StateError):
            kernels.batchnorm(x, state, "infer")

    def test_channel_mismatch(self):
        x = np.zeros((1, 2, 2, 3), dtype=np.float32)
        with pytest.raises(DimensionError):
            kernels.batchnorm(x, BatchNormState.identity(2), "infer")


class TestRelu6:
    def test_clamp_definition(self):
        x = np.array([-1.0, 0.0, 3.0, 6.0, 9.0], dtype=np.float32).reshape(1, 1, 5, 1)
        out = kernels.relu6(x)
        assert np.array_equal(out.reshape(-1), [0, 0, 3, 6, 6])

    def test_zero_input(self):
        x = np.zeros((2, 3, 3, 2), dtype=np.float32)
        assert np.all(kernels.relu6(x) == 0.0)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotent(self, seed):
        x = make_rng(seed).uniform(-5, 11, size=(1, 3, 4, 2)).astype(np.float32)
        once = kernels.relu6(x)
        assert np.array_equal(kernels.relu6(once), once)


class TestPooling:
    def test_avg_constant(self):
        x = np.full((2, 3, 5, 4), 5.0, dtype=np.float32)
        out = kernels.global_avg_pool(x)
        assert out.shape == (2, 1, 1, 4)
        assert np.allclose(out, 5.0)

    def test_avg_small_case(self):
        x = np.array([1, 2, 3, 4], dtype=np.float32).reshape(1, 2, 2, 1)
        assert kernels.global_avg_pool(x).reshape(()) == pytest.approx(2.5)

    def test_avg_matches_loop_oracle(self):
        x = make_rng(13).normal(size=(3, 5, 4, 2)).astype(np.float32)
        assert np.max(np.abs(kernels.global_avg_pool(x) - avg_pool_loops(x))) < 1e-6

    def test_max_constant(self):
        x = np.full((1, 4, 4, 2), 5.0, dtype=np.float32)
        assert np.all(kernels.global_max_pool(x) == 5.0)

    def test_max_small_case(self):
        x = np.array([1, 2, 3, 4], dtype=np.float32).reshape(1, 2, 2, 1)
        assert kernels.global_max_pool(x).reshape(()) == 4.0

    def test_max_matches_loop_oracle(self):
        x = make_rng(14).normal(size=(3, 6, 3, 4)).astype(np.float32)
        assert np.array_equal(kernels.global_max_pool(x), max_pool_loops(x))


class TestDense:
    def test_identity_weights(self):
        x = make_rng(15).normal(size=(3, 1, 1, 4)).astype(np.float32)
        out = kernels.dense(x, np.eye(4, dtype=np.float32),
                            np.zeros(4, dtype=np.float32))
        assert np.allclose(out, x, atol=1e-7)

    def test_zero_weights_broadcast_bias(self):
        x = make_rng(16).normal(size=(2, 1, 1, 3)).astype(np.float32)
        bias = np.array([1.0, -2.0], dtype=np.float32)
        out = kernels.dense(x, np.zeros((3, 2), dtype=np.float32), bias)
        assert np.allclose(out, np.broadcast_to(bias, (2, 1, 1, 2)))

    def test_matches_loop_oracle(self):
        rng = make_rng(17)
        x = rng.normal(size=(2, 1, 1, 5)).astype(np.float32)
        w = rng.normal(size=(5, 3)).astype(np.float32)
        b = rng.normal(size=3).astype(np.float32)
        out = kernels.dense(x, w, b)
        assert np.max(np.abs(out - dense_scalar(x, w, b))) < 1e-6

    def test_shape_mismatch(self):
        x = np.zeros((1, 1, 1, 4), dtype=np.float32)
        with pytest.raises(DimensionError):
            kernels.dense(x, np.zeros((5, 2), dtype=np.float32),
                          np.zeros(2, dtype=np.float32))
        with pytest.raises(DimensionError):
            kernels.dense(np.zeros((1, 2, 2, 4), dtype=np.float32),
                          np.zeros((4, 2), dtype=np.float32),
                          np.zeros(2, dtype=np.float32))


class TestSoftmax:
    def test_uniform_logits(self):
        x = np.zeros((2, 1, 1, 6), dtype=np.float32)
        out = kernels.softmax(x)
        assert np.allclose(out, 1 / 6, atol=1e-7)

    def test_large_logit_no_overflow(self):
        x = np.array([1000.0, 0, 0, 0, 0, 0], dtype=np.float32).reshape(1, 1, 1, 6)
        out = kernels.softmax(x).reshape(-1)
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-6)
        assert np.all(out[1:] < 1e-6)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_shift_invariance_and_rows(self, seed):
        x = make_rng(seed).normal(size=(3, 1, 1, 6)).astype(np.float32)
        out = kernels.softmax(x)
        shifted = kernels.softmax(x + np.float32(7.3))
        assert np.max(np.abs(out - shifted)) < 1e-6
        sums = out.reshape(3, -1).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-6
        assert np.all(out >= 0)
        assert np.array_equal(out.reshape(3, -1).argmax(axis=1),
                              x.reshape(3, -1).argmax(axis=1))


class TestDropout:
    def test_rate_zero_train_is_identity(self):
        x = make_rng(18).normal(size=(2, 3, 3, 2)).astype(np.float32)
        out = kernels.dropout(x, 0.0, "train", make_rng(1))
        assert np.array_equal(out, x)

    def test_infer_is_identity(self):
        x = make_rng(19).normal(size=(2, 3, 3, 2)).astype(np.float32)
        out = kernels.dropout(x, 0.7, "infer")
        assert np.array_equal(out, x)

    def test_rate_one_rejected(self):
        x = np.zeros((1, 1, 1, 1), dtype=np.float32)
        with pytest.raises(ConfigError):
            kernels.dropout(x, 1.0, "train", make_rng(1))

    def test_mean_preserved_at_scale(self):
        # law of large numbers on the seeded stream
        x = np.ones((1, 100, 100, 10), dtype=np.float32)
        out = kernels.dropout(x, 0.5, "train", make_rng(99))
        assert 0.98 <= float(out.mean()) <= 1.02

    def test_seeded_mask_is_deterministic(self):
        x = make_rng(20).normal(size=(1, 8, 8, 4)).astype(np.float32)
        a = kernels.dropout(x, 0.3, "train", make_rng(5))
        b = kernels.dropout(x, 0.3, "train", make_rng(5))
        assert np.array_equal(a, b)


class TestBulkOracleEquivalence:
    """Random-instance equivalence against the naive loop oracles on shapes
    up to 4x16x16x8."""

    N_INSTANCES = 30  # the acceptance suite runs the full count

    def test_conv2d_random_instances(self):
        rng = make_rng(2024)
        for _ in range(self.N_INSTANCES):
            n, h, w = rng.integers(1, 5), rng.integers(3, 17), rng.integers(3, 17)
            cin, cout = rng.integers(1, 9), rng.integers(1, 9)
            kh, kw = rng.integers(1, 4), rng.integers(1, 4)
            stride = int(rng.integers(1, 3))
            x = rng.normal(size=(n, h, w, cin)).astype(np.float32)
            k = rng.normal(size=(kh, kw, cin, cout)).astype(np.float32)
            out = kernels.conv2d(x, ConvParams(k, stride, "same"))
            ref = conv2d_windowed(x, k, stride, "same")
            assert np.max(np.abs(out - ref)) < 1e-5

    def test_depthwise_random_instances(self):
        rng = make_rng(2025)
        for _ in range(self.N_INSTANCES):
            n, h, w = rng.integers(1, 5), rng.integers(3, 17), rng.integers(3, 17)
            c = rng.integers(1, 9)
            kh, kw = rng.integers(1, 4), rng.integers(1, 4)
            stride = int(rng.integers(1, 3))
            x = rng.normal(size=(n, h, w, c)).astype(np.float32)
            k = rng.normal(size=(kh, kw, c, 1)).astype(np.float32)
            out = kernels.depthwise_conv2d(x, ConvParams(k, stride, "same"))
            ref = depthwise_windowed(x, k, stride, "same")
            assert np.max(np.abs(out - ref)) < 1e-5
