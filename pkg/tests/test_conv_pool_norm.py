"""Convolution, pooling, and batch norm against independent oracles."""

import numpy as np
import numpy.testing as npt
import pytest

from qsla.autodiff import ops
from qsla.autodiff.tensor import Tape, Tensor
from qsla.errors import NumericalError, ShapeError


def conv1d_direct(x, w, b):
    """Direct triple-loop summation: bias first, then (channel, tap) order.

    Scalar arithmetic only; shares no code with the production op.
    """
    x = np.asarray(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    n, c_in, length = x.shape
    f, _, k = w.shape
    pad = k // 2
    xpad = np.zeros((n, c_in, length + 2 * pad), dtype=x.dtype)
    xpad[:, :, pad : pad + length] = x
    out = np.zeros((n, f, length), dtype=x.dtype)
    for ni in range(n):
        for fi in range(f):
            for t in range(length):
                acc = x.dtype.type(b[fi])
                for ci in range(c_in):
                    for ki in range(k):
                        acc = acc + w[fi, ci, ki] * xpad[ni, ci, t + ki]
                out[ni, fi, t] = acc
    return out[0] if squeeze else out


class TestConv1d:
    def test_edge_detector_example(self):
        x = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
        w = Tensor(np.array([[[1.0, 0.0, -1.0]]]))
        b = Tensor(np.zeros(1))
        out = ops.conv1d(x, w, b)
        npt.assert_array_equal(out.data, [[-2.0, -2.0, -2.0, 3.0]])

    def test_identity_kernel(self):
        # centered delta kernel per input channel reproduces that channel
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 16))
        w = np.zeros((3, 3, 3))
        for c in range(3):
            w[c, c, 1] = 1.0
        out = ops.conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(3)))
        npt.assert_array_equal(out.data, x)

    @pytest.mark.parametrize("seed", range(5))
    def test_bit_exact_against_direct_summation_f64(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 3, 11))
        w = rng.standard_normal((4, 3, 3))
        b = rng.standard_normal(4)
        out = ops.conv1d(Tensor(x), Tensor(w), Tensor(b))
        oracle = conv1d_direct(x, w, b)
        assert out.data.tobytes() == oracle.tobytes()

    def test_bit_exact_f32_and_batched(self):
        rng = np.random.default_rng(99)
        x = rng.standard_normal((3, 2, 9)).astype(np.float32)
        w = rng.standard_normal((5, 2, 5)).astype(np.float32)
        b = rng.standard_normal(5).astype(np.float32)
        out = ops.conv1d(Tensor(x), Tensor(w), Tensor(b))
        assert out.data.tobytes() == conv1d_direct(x, w, b).tobytes()

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channels"):
            ops.conv1d(Tensor(np.ones((2, 8))), Tensor(np.ones((4, 3, 3))),
                       Tensor(np.zeros(4)))

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            ops.conv1d(Tensor(np.ones((1, 8))), Tensor(np.ones((1, 1, 4))),
                       Tensor(np.zeros(1)))

    def test_all_three_gradients_vs_finite_difference(self):
        from qsla.autodiff.gradcheck import check_gradients

        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((2, 8)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        result = check_gradients(
            "conv", lambda: ops.sum_sq(ops.conv1d(x, w, b)),
            {"x": x, "w": w, "b": b}, 1e-5)
        assert result.passed, result.line()


class TestMaxpool:
    def test_example_with_trailing_window_dropped(self):
        out = ops.maxpool1d(Tensor(np.array([[1.0, 5.0, 2.0, 7.0, 3.0, 0.0, 4.0]])))
        npt.assert_array_equal(out.data, [[5.0, 7.0]])

    def test_constant_input(self):
        out = ops.maxpool1d(Tensor(np.full((2, 9), 3.5)))
        npt.assert_array_equal(out.data, np.full((2, 3), 3.5))

    def test_length_128_gives_42(self):
        out = ops.maxpool1d(Tensor(np.zeros((1, 128))))
        assert out.shape == (1, 42)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            ops.maxpool1d(Tensor(np.zeros((1, 2))))

    def test_gradient_routes_to_first_max_on_ties(self):
        x = Tensor(np.array([[2.0, 2.0, 1.0]]), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum_all(ops.maxpool1d(x))
        tape.backward(loss)
        npt.assert_array_equal(x.grad, [[1.0, 0.0, 0.0]])


class TestBatchnorm:
    def test_train_mode_normalizes(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((4, 3, 20)) * 5 + 2)
        state = ops.BnState.fresh(3, dtype=np.float64)
        out = ops.batchnorm1d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)),
                              state, "train")
        mean = out.data.mean(axis=(0, 2))
        var = out.data.var(axis=(0, 2))
        assert np.all(np.abs(mean) < 1e-6)
        assert np.all(np.abs(var - 1.0) < 1e-5)

    def test_affine_transform(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((8, 2, 50)))
        state = ops.BnState.fresh(2, dtype=np.float64)
        out = ops.batchnorm1d(x, Tensor(np.full(2, 2.0)), Tensor(np.full(2, 3.0)),
                              state, "train")
        npt.assert_allclose(out.data.mean(axis=(0, 2)), [3.0, 3.0], atol=1e-6)
        npt.assert_allclose(out.data.std(axis=(0, 2)), [2.0, 2.0], atol=1e-4)

    def test_eval_before_any_update_raises(self):
        state = ops.BnState.fresh(2, dtype=np.float64)
        with pytest.raises(NumericalError):
            ops.batchnorm1d(Tensor(np.ones((2, 2, 4))), Tensor(np.ones(2)),
                            Tensor(np.zeros(2)), state, "eval")

    def test_running_stats_move_toward_batch(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.standard_normal((16, 1, 64)) + 10.0)
        state = ops.BnState.fresh(1, dtype=np.float64)
        for _ in range(50):
            ops.batchnorm1d(x, Tensor(np.ones(1)), Tensor(np.zeros(1)),
                            state, "train")
        assert abs(state.mean[0] - 10.0) < 0.2
        assert state.updates == 50

    def test_eval_uses_running_stats(self):
        rng = np.random.default_rng(3)
        gamma, beta = Tensor(np.ones(1)), Tensor(np.zeros(1))
        state = ops.BnState.fresh(1, dtype=np.float64)
        x = Tensor(rng.standard_normal((8, 1, 32)))
        ops.batchnorm1d(x, gamma, beta, state, "train")
        y1 = ops.batchnorm1d(x, gamma, beta, state, "eval").data
        y2 = ops.batchnorm1d(x, gamma, beta, state, "eval").data
        # eval mode is frozen: identical outputs, no state drift
        npt.assert_array_equal(y1, y2)
        assert state.updates == 1

    def test_gradcheck_tolerance(self):
        from qsla.autodiff.gradcheck import check_gradients

        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((3, 2, 6)), requires_grad=True)
        gamma = Tensor(rng.uniform(0.5, 2.0, 2), requires_grad=True)
        beta = Tensor(rng.standard_normal(2), requires_grad=True)

        def loss():
            state = ops.BnState.fresh(2, dtype=np.float64)
            return ops.sum_sq(ops.batchnorm1d(x, gamma, beta, state, "train"))

        result = check_gradients("bn", loss, {"x": x, "g": gamma, "b": beta}, 1e-4)
        assert result.passed, result.line()
