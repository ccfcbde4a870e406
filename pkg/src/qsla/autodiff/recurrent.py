"""LSTM cell and bidirectional sequence layers built from tape primitives.

Gate weight layout: the projection matrices map onto four contiguous
hidden-size blocks in the fixed order [input, forget, candidate, output].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import ops
from .tensor import Tensor


@dataclass
class LstmState:
    """Hidden and cell activations for one direction at one time step."""

    hidden: Tensor
    cell: Tensor

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise ShapeError(
                f"LstmState: hidden {tuple(self.hidden.shape)} and cell"
                f" {tuple(self.cell.shape)} must match"
            )


@dataclass
class LstmParams:
    """One direction of an LSTM: w_x (F, 4H), w_h (H, 4H), b (4H,)."""

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    def validate(self, input_size: int) -> None:
        h = self.hidden_size
        if self.w_x.shape != (input_size, 4 * h):
            raise ShapeError(
                f"lstm: w_x must be ({input_size}, {4 * h}), got {tuple(self.w_x.shape)}"
            )
        if self.w_h.shape != (h, 4 * h):
            raise ShapeError(f"lstm: w_h must be ({h}, {4 * h}), got {tuple(self.w_h.shape)}")
        if self.b.shape != (4 * h,):
            raise ShapeError(f"lstm: b must be ({4 * h},), got {tuple(self.b.shape)}")


def zero_state(batch: int, hidden: int, dtype) -> LstmState:
    z = np.zeros((batch, hidden), dtype=dtype)
    return LstmState(Tensor(z), Tensor(z.copy()))


def _gates(pre: Tensor, h: int):
    i = ops.sigmoid(ops.narrow(pre, 1, 0, h))
    f = ops.sigmoid(ops.narrow(pre, 1, h, h))
    g = ops.tanh(ops.narrow(pre, 1, 2 * h, h))
    o = ops.sigmoid(ops.narrow(pre, 1, 3 * h, h))
    return i, f, g, o


def _step(pre: Tensor, prev: LstmState, h: int) -> LstmState:
    i, f, g, o = _gates(pre, h)
    c = ops.add(ops.mul(f, prev.cell), ops.mul(i, g))
    hid = ops.mul(o, ops.tanh(c))
    return LstmState(hid, c)


def lstm_cell(x_t: Tensor, prev: LstmState, params: LstmParams) -> LstmState:
    """One LSTM update: gates from x_t and prev.hidden, new (hidden, cell).

    x_t may be a single feature vector (F,) or a batch (N, F); the state
    shape follows the input.
    """
    squeeze = x_t.data.ndim == 1
    x2 = ops.reshape(x_t, (1, -1)) if squeeze else x_t
    params.validate(x2.shape[1])
    h = params.hidden_size
    prev2 = prev
    if squeeze:
        prev2 = LstmState(
            ops.reshape(prev.hidden, (1, -1)), ops.reshape(prev.cell, (1, -1))
        )
    pre = ops.add(ops.linear(x2, params.w_x, params.b), ops.matmul(prev2.hidden, params.w_h))
    state = _step(pre, prev2, h)
    if squeeze:
        state = LstmState(
            ops.reshape(state.hidden, (-1,)), ops.reshape(state.cell, (-1,))
        )
    return state


def _run_direction(z: Tensor, params: LstmParams, reverse: bool) -> Tensor:
    n, t_len, f = z.shape
    h = params.hidden_size
    # One big input projection for the whole sequence, then the recurrence.
    xw = ops.reshape(ops.linear(ops.reshape(z, (n * t_len, f)), params.w_x, params.b),
                     (n, t_len, 4 * h))
    state = zero_state(n, h, z.data.dtype)
    outputs: list[Tensor | None] = [None] * t_len
    steps = range(t_len - 1, -1, -1) if reverse else range(t_len)
    for t in steps:
        pre = ops.add(ops.index_time(xw, t), ops.matmul(state.hidden, params.w_h))
        state = _step(pre, state, h)
        outputs[t] = state.hidden
    return ops.stack_time(outputs)


def bilstm_forward(z: Tensor, forward: LstmParams, backward: LstmParams) -> Tensor:
    """Bidirectional LSTM over a (T, F) or (N, T, F) sequence.

    Both directions start from zero states. The output at step t is the
    concatenation [forward hidden at t, backward hidden at t], shape
    (..., T, 2H); the full sequence is returned.
    """
    squeeze = z.data.ndim == 2
    z3 = ops.reshape(z, (1, *z.shape)) if squeeze else z
    if z3.data.ndim != 3:
        raise ShapeError(f"bilstm expects (T, F) or (N, T, F), got {tuple(z.shape)}")
    if z3.shape[1] == 0:
        raise ShapeError("bilstm: empty sequence")
    forward.validate(z3.shape[2])
    backward.validate(z3.shape[2])
    fwd = _run_direction(z3, forward, reverse=False)
    bwd = _run_direction(z3, backward, reverse=True)
    out = ops.concat([fwd, bwd], axis=2)
    return ops.reshape(out, out.shape[1:]) if squeeze else out
