"""Temporal attention: a learned linear functional scores each time step,
softmax over time turns the scores into weights, and the sequence is
re-weighted step by step (shape preserved for downstream flattening).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import ops
from .tensor import Tensor, record_op


@dataclass
class AttentionParams:
    """Scoring parameters: weights (D,) and a scalar bias.

    D must equal the feature width of the sequence being attended over
    (2 x cells for a BiLSTM input).
    """

    weights: Tensor
    bias: Tensor

    def validate(self, feature_dim: int) -> None:
        if self.weights.shape != (feature_dim,):
            raise ShapeError(
                f"attention: weights must be ({feature_dim},), got"
                f" {tuple(self.weights.shape)}"
            )
        if self.bias.data.ndim != 0:
            raise ShapeError("attention: bias must be a scalar")


def seq_score(h: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-step scores e[n, t] = h[n, t, :] . w + b for h of shape (N, T, D)."""
    out_data = np.tensordot(h.data, w.data, axes=([2], [0])) + b.data

    def backward_fn(g):
        if h.requires_grad:
            h.accumulate_grad(g[:, :, None] * w.data[None, None, :])
        if w.requires_grad:
            w.accumulate_grad(np.tensordot(g, h.data, axes=([0, 1], [0, 1])))
        if b.requires_grad:
            b.accumulate_grad(np.asarray(g.sum(), dtype=b.data.dtype))

    return record_op(out_data, (h, w, b), backward_fn)


def seq_scale(h: Tensor, alpha: Tensor) -> Tensor:
    """Multiply step t of h (N, T, D) by the scalar weight alpha[n, t]."""
    out_data = h.data * alpha.data[:, :, None]

    def backward_fn(g):
        if h.requires_grad:
            h.accumulate_grad(g * alpha.data[:, :, None])
        if alpha.requires_grad:
            alpha.accumulate_grad((g * h.data).sum(axis=2))

    return record_op(out_data, (h, alpha), backward_fn)


def attention_forward(h: Tensor, params: AttentionParams) -> Tensor:
    """Re-weight a (T, D) or (N, T, D) sequence by softmax attention over time.

    Returns the same shape as the input; the weights for each sequence sum
    to one over its time steps.
    """
    squeeze = h.data.ndim == 2
    h3 = ops.reshape(h, (1, *h.shape)) if squeeze else h
    if h3.data.ndim != 3:
        raise ShapeError(f"attention expects (T, D) or (N, T, D), got {tuple(h.shape)}")
    if h3.shape[1] == 0:
        raise ShapeError("attention: empty sequence")
    params.validate(h3.shape[2])
    scores = seq_score(h3, params.weights, params.bias)
    alpha = ops.softmax(scores, axis=1)
    out = seq_scale(h3, alpha)
    return ops.reshape(out, out.shape[1:]) if squeeze else out


def attention_weights(h: Tensor, params: AttentionParams) -> np.ndarray:
    """The softmax weights over time (no recording), for inspection/tests."""
    squeeze = h.data.ndim == 2
    hd = h.data[None] if squeeze else h.data
    params.validate(hd.shape[2])
    e = np.tensordot(hd, params.weights.data, axes=([2], [0])) + params.bias.data
    e = e - e.max(axis=1, keepdims=True)
    ex = np.exp(e)
    alpha = ex / ex.sum(axis=1, keepdims=True)
    return alpha[0] if squeeze else alpha
