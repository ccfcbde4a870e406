"""Differentiable primitives: elementwise math, matmul, shape ops,
activations, pooling, normalization, dropout, and the fused
softmax/cross-entropy loss.

All functions take and return `Tensor`s and record their backward rule on
the active `Tape`. Elementwise ops require identical shapes; the only
implicit broadcast is scalar-with-tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ShapeError
from .tensor import Tensor, as_tensor, record_op


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def _binary_args(a, b, op: str):
    """Lift python scalars; enforce the strict shape contract otherwise."""
    a_scalar = np.isscalar(a)
    b_scalar = np.isscalar(b)
    if a_scalar and b_scalar:
        raise ShapeError(f"{op}: at least one operand must be a Tensor")
    if a_scalar:
        a = Tensor(np.full((), a, dtype=b.data.dtype))
    elif b_scalar:
        b = Tensor(np.full((), b, dtype=a.data.dtype))
    elif a.data.ndim != 0 and b.data.ndim != 0:
        _check_same_shape(a, b, op)
    return a, b


def add(a, b) -> Tensor:
    a, b = _binary_args(a, b, "add")
    out_data = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g if a.shape == out_data.shape else g.sum())
        if b.requires_grad:
            b.accumulate_grad(g if b.shape == out_data.shape else g.sum())

    return record_op(out_data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = _binary_args(a, b, "sub")
    out_data = a.data - b.data

    def backward_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g if a.shape == out_data.shape else g.sum())
        if b.requires_grad:
            b.accumulate_grad(-g if b.shape == out_data.shape else -g.sum())

    return record_op(out_data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = _binary_args(a, b, "mul")
    out_data = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            ga = g * b.data
            a.accumulate_grad(ga if a.shape == out_data.shape else ga.sum())
        if b.requires_grad:
            gb = g * a.data
            b.accumulate_grad(gb if b.shape == out_data.shape else gb.sum())

    return record_op(out_data, (a, b), backward_fn)


def elementwise(a, b, kind: str) -> Tensor:
    """Dispatch form of the elementwise ops: kind in {add, sub, mul}."""
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[kind]
    except KeyError:
        raise ShapeError(f"elementwise: unknown kind {kind!r}") from None
    return fn(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-D operands, got {tuple(a.shape)} and {tuple(b.shape)}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree, {tuple(a.shape)} @ {tuple(b.shape)}"
        )
    out_data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return record_op(out_data, (a, b), backward_fn)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows. x: (n, f), w: (f, o), b: (o,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError("linear expects x (n,f), w (f,o), b (o,)")
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeError(
            f"linear: inconsistent shapes x{tuple(x.shape)} w{tuple(w.shape)}"
            f" b{tuple(b.shape)}"
        )
    out_data = x.data @ w.data + b.data

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g @ w.data.T)
        if w.requires_grad:
            w.accumulate_grad(x.data.T @ g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return record_op(out_data, (x, w, b), backward_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out_data = np.where(mask, x.data, x.data.dtype.type(0))

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return record_op(out_data, (x,), backward_fn)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out_data * out_data))

    return record_op(out_data, (x,), backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    # Stable in both tails: exp is only taken of non-positive values.
    d = x.data
    core = 1.0 / (1.0 + np.exp(-np.abs(d)))
    out_data = np.where(d >= 0, core, 1.0 - core).astype(d.dtype, copy=False)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data * (1.0 - out_data))

    return record_op(out_data, (x,), backward_fn)


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid}[kind]
    except KeyError:
        raise ShapeError(f"activation: unknown kind {kind!r}") from None
    return fn(x)


def concat(xs, axis: int) -> Tensor:
    """Stack tensors along `axis`; all other dimensions must match."""
    xs = list(xs)
    if not xs:
        raise ShapeError("concat of an empty list")
    ref = list(xs[0].shape)
    for x in xs[1:]:
        s = list(x.shape)
        if len(s) != len(ref) or any(
            i != axis and s[i] != ref[i] for i in range(len(s))
        ):
            raise ShapeError(
                f"concat: mismatched non-concat dims {tuple(ref)} vs {tuple(s)}"
            )
    out_data = np.concatenate([x.data for x in xs], axis=axis)
    sizes = [x.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            if x.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                x.accumulate_grad(g[tuple(idx)])

    return record_op(out_data, tuple(xs), backward_fn)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along `axis`."""
    if not (0 <= start and start + length <= x.shape[axis]):
        raise ShapeError(
            f"narrow: [{start}, {start + length}) out of range for axis {axis}"
            f" of shape {tuple(x.shape)}"
        )
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out_data = x.data[idx].copy()

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad_at(idx, g)

    return record_op(out_data, (x,), backward_fn)


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return record_op(out_data, (x,), backward_fn)


def swap_axes(x: Tensor, a: int, b: int) -> Tensor:
    out_data = np.ascontiguousarray(np.swapaxes(x.data, a, b))

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(np.swapaxes(g, a, b))

    return record_op(out_data, (x,), backward_fn)


def index_time(x: Tensor, t: int) -> Tensor:
    """Select step t of a (n, T, d) sequence -> (n, d)."""
    out_data = x.data[:, t, :].copy()

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad_at((slice(None), t, slice(None)), g)

    return record_op(out_data, (x,), backward_fn)


def stack_time(xs) -> Tensor:
    """Stack T tensors of shape (n, d) into (n, T, d)."""
    xs = list(xs)
    out_data = np.stack([x.data for x in xs], axis=1)

    def backward_fn(g):
        for t, x in enumerate(xs):
            if x.requires_grad:
                x.accumulate_grad(g[:, t, :])

    return record_op(out_data, tuple(xs), backward_fn)


def sum_sq(x: Tensor) -> Tensor:
    """Sum of squared entries, as a 0-d tensor (used for the L2 penalty)."""
    out_data = np.asarray((x.data * x.data).sum(), dtype=x.data.dtype)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * 2.0 * x.data)

    return record_op(out_data, (x,), backward_fn)


def sum_all(x: Tensor) -> Tensor:
    out_data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g, x.shape))

    return record_op(out_data, (x,), backward_fn)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis`."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            x.accumulate_grad(out_data * (g - inner))

    return record_op(out_data, (x,), backward_fn)


def maxpool1d(x: Tensor, window: int = 3, stride: int = 3) -> Tensor:
    """Non-overlapping per-channel max over (..., C, L).

    The trailing partial window is dropped. Gradient flows to the first
    occurrence of each window maximum.
    """
    if window != stride:
        raise ShapeError("maxpool1d supports non-overlapping pooling only")
    length = x.shape[-1]
    if length < window:
        raise ShapeError(f"maxpool1d: length {length} shorter than window {window}")
    n_out = length // window
    lead = x.shape[:-1]
    trimmed = x.data[..., : n_out * window].reshape(*lead, n_out, window)
    arg = trimmed.argmax(axis=-1)
    out_data = np.take_along_axis(trimmed, arg[..., None], axis=-1)[..., 0]

    def backward_fn(g):
        if x.requires_grad:
            dwin = np.zeros_like(trimmed)
            np.put_along_axis(dwin, arg[..., None], g[..., None], axis=-1)
            dx = np.zeros_like(x.data)
            dx[..., : n_out * window] = dwin.reshape(*lead, n_out * window)
            x.accumulate_grad(dx)

    return record_op(out_data, (x,), backward_fn)


@dataclass
class BnState:
    """Running statistics for one batch-norm layer (one entry per channel)."""

    mean: np.ndarray
    var: np.ndarray
    updates: int = 0

    @classmethod
    def fresh(cls, channels: int, dtype=np.float32) -> "BnState":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype), 0)

    def copy(self) -> "BnState":
        return BnState(self.mean.copy(), self.var.copy(), self.updates)


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BnState,
    mode: str,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (N, C, L).

    Train mode normalizes with batch statistics over the N and L axes and
    updates `state` by exponential moving average; eval mode uses the
    running statistics and requires at least one prior update.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"batchnorm1d expects (N, C, L), got {tuple(x.shape)}")
    n, c, length = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(
            f"batchnorm1d: gamma/beta must have shape ({c},), got"
            f" {tuple(gamma.shape)} and {tuple(beta.shape)}"
        )
    if mode == "train":
        m = n * length
        if m < 2:
            raise ShapeError("batchnorm1d train mode needs at least 2 values/channel")
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        state.mean = ((1.0 - momentum) * state.mean + momentum * mean).astype(
            state.mean.dtype
        )
        state.var = ((1.0 - momentum) * state.var + momentum * var).astype(
            state.var.dtype
        )
        state.updates += 1
    elif mode == "eval":
        if state.updates == 0:
            raise NumericalError(
                "batchnorm1d eval mode before any training update"
            )
        mean = state.mean.astype(x.data.dtype)
        var = state.var.astype(x.data.dtype)
    else:
        raise ShapeError(f"batchnorm1d: unknown mode {mode!r}")

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None]) * inv_std[None, :, None]
    out_data = gamma.data[None, :, None] * xhat + beta.data[None, :, None]

    def backward_fn(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 2)))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gxhat = g * gamma.data[None, :, None]
            if mode == "train":
                m = n * length
                s1 = gxhat.sum(axis=(0, 2), keepdims=True)
                s2 = (gxhat * xhat).sum(axis=(0, 2), keepdims=True)
                dx = (inv_std[None, :, None] / m) * (m * gxhat - s1 - xhat * s2)
            else:
                dx = gxhat * inv_std[None, :, None]
            x.accumulate_grad(dx.astype(x.data.dtype, copy=False))

    return record_op(out_data, (x, gamma, beta), backward_fn)


def dropout(x: Tensor, p: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: train mode zeroes entries w.p. p and rescales
    survivors by 1/(1-p); eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout: p must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if mode != "train":
        raise ShapeError(f"dropout: unknown mode {mode!r}")
    keep = 1.0 - p
    mask = (rng.random(x.shape) < keep).astype(x.data.dtype)
    scale = x.data.dtype.type(1.0 / keep)
    out_data = x.data * mask * scale

    def backward_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask * scale)

    return record_op(out_data, (x,), backward_fn)


def softmax_crossentropy(logits: Tensor, labels) -> tuple[Tensor, np.ndarray]:
    """Mean cross-entropy over the batch with a fused softmax.

    Returns the scalar loss tensor and the (N, C) probability array.
    Backward is the closed form (probs - onehot) / N.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_crossentropy expects (N, C), got {tuple(logits.shape)}")
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels must have shape ({n},), got {tuple(labels.shape)}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise ShapeError(f"labels must lie in [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    picked = probs[np.arange(n), labels]
    loss_data = np.asarray(-np.log(picked).mean(), dtype=logits.data.dtype)

    def backward_fn(g):
        if logits.requires_grad:
            d = probs.copy()
            d[np.arange(n), labels] -= 1.0
            logits.accumulate_grad(g * d / n)

    loss = record_op(loss_data, (logits,), backward_fn)
    return loss, probs


def conv1d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """1-D cross-correlation with `same` zero padding and stride 1.

    x: (C_in, L) or (N, C_in, L); w: (C_out, C_in, K) with K odd; b: (C_out,).
    The forward pass accumulates bias first, then products in (channel,
    tap) order, so the result is bit-identical to a direct summation in
    the same order regardless of dtype. Weight gradients use a BLAS
    contraction (tolerance-based contract).
    """
    from ._kernels import conv1d_backward_dx, conv1d_forward

    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or w.data.ndim != 3 or b.data.ndim != 1:
        raise ShapeError("conv1d expects x (N,C,L), w (F,C,K), b (F,)")
    n, c_in, length = xd.shape
    f, c_w, k = w.shape
    if c_w != c_in:
        raise ShapeError(
            f"conv1d: input has {c_in} channels but weights expect {c_w}"
        )
    if b.shape != (f,):
        raise ShapeError(f"conv1d: bias must have shape ({f},)")
    if k % 2 != 1:
        raise ShapeError("conv1d: kernel size must be odd for same padding")
    pad = k // 2
    xpad = np.zeros((n, c_in, length + 2 * pad), dtype=xd.dtype)
    xpad[:, :, pad : pad + length] = xd
    out = np.empty((n, f, length), dtype=xd.dtype)
    conv1d_forward(xpad, np.ascontiguousarray(w.data), b.data, out)

    def backward_fn(g):
        g3 = np.ascontiguousarray(g[None] if squeeze else g)
        if b.requires_grad:
            b.accumulate_grad(g3.sum(axis=(0, 2)))
        if w.requires_grad:
            # windows[n, c, k, t] = xpad[n, c, t + k], via stride tricks
            s0, s1, s2 = xpad.strides
            windows = np.lib.stride_tricks.as_strided(
                xpad, shape=(n, c_in, k, length), strides=(s0, s1, s2, s2)
            )
            dw = np.tensordot(g3, windows, axes=([0, 2], [0, 3]))
            w.accumulate_grad(dw)
        if x.requires_grad:
            dxpad = np.zeros_like(xpad)
            conv1d_backward_dx(np.ascontiguousarray(w.data), g3, dxpad)
            dx = dxpad[:, :, pad : pad + length]
            x.accumulate_grad(dx[0] if squeeze else dx)

    return record_op(out[0] if squeeze else out, (x, w, b), backward_fn)
