"""LSTM/BiLSTM against a naive recurrence, attention, and dropout."""

import numpy as np
import numpy.testing as npt
import pytest

from qsla.autodiff import ops
from qsla.autodiff.attention import (
    AttentionParams,
    attention_forward,
    attention_weights,
)
from qsla.autodiff.recurrent import (
    LstmParams,
    LstmState,
    bilstm_forward,
    lstm_cell,
    zero_state,
)
from qsla.autodiff.tensor import Tensor
from qsla.errors import ShapeError


def _params(rng, input_size, hidden, dtype=np.float64):
    return LstmParams(
        Tensor(rng.standard_normal((input_size, 4 * hidden)).astype(dtype)),
        Tensor(rng.standard_normal((hidden, 4 * hidden)).astype(dtype)),
        Tensor(rng.standard_normal(4 * hidden).astype(dtype)),
    )


def naive_lstm_sequence(z, w_x, w_h, b, reverse=False):
    """Step-by-step reference recurrence, gate order [i, f, g, o]."""

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    t_len, feat = z.shape
    hidden = w_h.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    out = np.zeros((t_len, hidden))
    steps = range(t_len - 1, -1, -1) if reverse else range(t_len)
    for t in steps:
        pre = z[t] @ w_x + h @ w_h + b
        i = sig(pre[:hidden])
        f = sig(pre[hidden : 2 * hidden])
        g = np.tanh(pre[2 * hidden : 3 * hidden])
        o = sig(pre[3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


class TestLstmCell:
    def test_zero_weights_zero_state_fixed_point(self):
        params = LstmParams(Tensor(np.zeros((2, 8))), Tensor(np.zeros((2, 8))),
                            Tensor(np.zeros(8)))
        prev = LstmState(Tensor(np.zeros(2)), Tensor(np.zeros(2)))
        state = lstm_cell(Tensor(np.ones(2)), prev, params)
        npt.assert_array_equal(state.hidden.data, np.zeros(2))
        npt.assert_array_equal(state.cell.data, np.zeros(2))

    def test_scalar_cell_hand_value(self):
        # all W=0, b=0, C_prev=1: gates are 0.5, candidate 0, so
        # C = 0.5 and H = 0.5 * tanh(0.5)
        params = LstmParams(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))),
                            Tensor(np.zeros(4)))
        prev = LstmState(Tensor(np.zeros(1)), Tensor(np.ones(1)))
        state = lstm_cell(Tensor(np.zeros(1)), prev, params)
        npt.assert_allclose(state.cell.data, [0.5], rtol=1e-12)
        npt.assert_allclose(state.hidden.data, [0.5 * np.tanh(0.5)], rtol=1e-12)
        assert abs(state.hidden.data[0] - 0.231059) < 1e-6

    def test_hidden_bounded_by_tanh(self):
        rng = np.random.default_rng(0)
        params = _params(rng, 3, 5)
        state = LstmState(Tensor(rng.standard_normal(5) * 0.1),
                          Tensor(rng.standard_normal(5) * 0.1))
        for _ in range(20):
            state = lstm_cell(Tensor(rng.standard_normal(3)), state, params)
        assert np.all(np.abs(state.hidden.data) < 1.0)

    def test_state_shape_mismatch(self):
        with pytest.raises(ShapeError):
            LstmState(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


class TestBilstm:
    def test_matches_naive_recurrence(self):
        rng = np.random.default_rng(7)
        z = rng.standard_normal((10, 8))
        fwd = _params(rng, 8, 6)
        bwd = _params(rng, 8, 6)
        out = bilstm_forward(Tensor(z), fwd, bwd)
        ref_f = naive_lstm_sequence(z, fwd.w_x.data, fwd.w_h.data, fwd.b.data)
        ref_b = naive_lstm_sequence(z, bwd.w_x.data, bwd.w_h.data, bwd.b.data,
                                    reverse=True)
        ref = np.concatenate([ref_f, ref_b], axis=1)
        assert out.shape == (10, 12)
        npt.assert_allclose(out.data, ref, atol=1e-5)

    def test_single_step_sequence(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal((1, 4))
        fwd = _params(rng, 4, 3)
        bwd = _params(rng, 4, 3)
        out = bilstm_forward(Tensor(z), fwd, bwd)
        # T=1: each direction is one independent cell update from zero state
        f_state = lstm_cell(Tensor(z[0]), LstmState(Tensor(np.zeros(3)),
                                                    Tensor(np.zeros(3))), fwd)
        b_state = lstm_cell(Tensor(z[0]), LstmState(Tensor(np.zeros(3)),
                                                    Tensor(np.zeros(3))), bwd)
        npt.assert_allclose(out.data[0, :3], f_state.hidden.data, rtol=1e-12)
        npt.assert_allclose(out.data[0, 3:], b_state.hidden.data, rtol=1e-12)

    def test_time_reversal_swaps_halves(self):
        # with identical parameters in both directions, reversing the input
        # reverses time and swaps the forward/backward output halves
        rng = np.random.default_rng(9)
        z = rng.standard_normal((6, 4))
        p = _params(rng, 4, 3)
        out = bilstm_forward(Tensor(z), p, p).data
        rev = bilstm_forward(Tensor(z[::-1].copy()), p, p).data
        npt.assert_allclose(rev[::-1, :3], out[:, 3:], atol=1e-12)
        npt.assert_allclose(rev[::-1, 3:], out[:, :3], atol=1e-12)

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(1)
        p = _params(rng, 4, 3)
        with pytest.raises(ShapeError):
            bilstm_forward(Tensor(np.zeros((0, 4))), p, p)

    def test_batched_matches_loop_over_batch(self):
        rng = np.random.default_rng(10)
        z = rng.standard_normal((3, 5, 4))
        fwd = _params(rng, 4, 2)
        bwd = _params(rng, 4, 2)
        batched = bilstm_forward(Tensor(z), fwd, bwd).data
        for n in range(3):
            single = bilstm_forward(Tensor(z[n]), fwd, bwd).data
            npt.assert_allclose(batched[n], single, atol=1e-12)


class TestAttention:
    def test_constant_sequence_uniform_weights(self):
        rng = np.random.default_rng(0)
        params = AttentionParams(Tensor(rng.standard_normal(4)),
                                 Tensor(np.asarray(0.3)))
        h = np.tile(rng.standard_normal(4), (7, 1))
        alpha = attention_weights(Tensor(h), params)
        npt.assert_allclose(alpha, np.full(7, 1 / 7), atol=1e-12)

    def test_softmax_closed_form(self):
        # scores [0, ln 2] -> weights [1/3, 2/3]
        params = AttentionParams(Tensor(np.array([1.0])), Tensor(np.asarray(0.0)))
        h = np.array([[0.0], [np.log(2.0)]])
        alpha = attention_weights(Tensor(h), params)
        npt.assert_allclose(alpha, [1 / 3, 2 / 3], rtol=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(3)
        params = AttentionParams(Tensor(rng.standard_normal(5)),
                                 Tensor(np.asarray(-0.2)))
        h = Tensor(rng.standard_normal((2, 9, 5)))
        alpha = attention_weights(h, params)
        npt.assert_allclose(alpha.sum(axis=1), np.ones(2), atol=1e-6)

    def test_output_shape_preserved(self):
        rng = np.random.default_rng(4)
        params = AttentionParams(Tensor(rng.standard_normal(6)),
                                 Tensor(np.asarray(0.0)))
        h = Tensor(rng.standard_normal((3, 8, 6)))
        out = attention_forward(h, params)
        assert out.shape == (3, 8, 6)
        # each step is the input step scaled by its weight
        alpha = attention_weights(h, params)
        npt.assert_allclose(out.data, h.data * alpha[:, :, None], rtol=1e-6)

    def test_empty_sequence_rejected(self):
        params = AttentionParams(Tensor(np.ones(3)), Tensor(np.asarray(0.0)))
        with pytest.raises(ShapeError):
            attention_forward(Tensor(np.zeros((0, 3))), params)

    def test_wrong_param_shape_rejected(self):
        params = AttentionParams(Tensor(np.ones(4)), Tensor(np.asarray(0.0)))
        with pytest.raises(ShapeError):
            attention_forward(Tensor(np.zeros((2, 3))), params)


class TestDropout:
    def test_eval_mode_is_identity(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((4, 5)))
        out = ops.dropout(x, 0.5, "eval", np.random.default_rng(1))
        assert out.data.tobytes() == x.data.tobytes()

    def test_p_zero_is_identity_in_train_mode(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((4, 5)))
        out = ops.dropout(x, 0.0, "train", np.random.default_rng(2))
        assert out.data.tobytes() == x.data.tobytes()

    def test_p_one_rejected(self):
        with pytest.raises(ShapeError):
            ops.dropout(Tensor(np.ones(3)), 1.0, "train", np.random.default_rng(0))

    def test_survivors_scaled(self):
        x = Tensor(np.full(1000, 2.0))
        out = ops.dropout(x, 0.5, "train", np.random.default_rng(3))
        values = np.unique(out.data)
        npt.assert_array_equal(values, [0.0, 4.0])

    def test_expectation_preserved_over_1e5_draws(self):
        base = np.array([1.0, -2.0, 3.0, 0.5])
        n = 100_000
        x = Tensor(np.tile(base, (n, 1)))  # each row is one independent draw
        out = ops.dropout(x, 0.5, "train", np.random.default_rng(12345))
        rel = np.abs(out.data.mean(axis=0) - base) / np.abs(base)
        assert np.all(rel < 0.01)
