"""Central finite-difference verification of tape gradients.

All checks run in 64-bit. The step is h = 1e-5 * max(1, |theta|) per entry
and errors are reported as |a - b| / max(1, |a|, |b|), the usual
relative-with-unit-floor scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .attention import AttentionParams, attention_forward
from .recurrent import LstmParams, lstm_cell, zero_state, bilstm_forward
from .tensor import Tape, Tensor

FD_STEP = 1e-5


@dataclass
class CheckResult:
    """Outcome of one gradient check: worst error across a parameter group."""

    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: max rel error {self.max_rel_error:.3e}"
            f" (tolerance {self.tolerance:.0e})"
        )


def rel_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def numeric_grad_entry(loss_fn, arr: np.ndarray, idx) -> float:
    """Central difference d(loss)/d(arr[idx]) with the step rule above."""
    orig = arr[idx]
    h = FD_STEP * max(1.0, abs(orig))
    arr[idx] = orig + h
    up = float(loss_fn().data)
    arr[idx] = orig - h
    down = float(loss_fn().data)
    arr[idx] = orig
    return (up - down) / (2.0 * h)


def check_gradients(name: str, loss_fn, params: dict[str, Tensor],
                    tolerance: float) -> CheckResult:
    """Compare tape gradients of loss_fn against finite differences.

    loss_fn must be a pure function of the tensors in `params` (plus
    constants) returning a scalar Tensor; every entry of every parameter
    is perturbed.
    """
    for p in params.values():
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    worst = 0.0
    for p in params.values():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            numeric = numeric_grad_entry(loss_fn, flat, i)
            worst = max(worst, rel_error(aflat[i], numeric))
    return CheckResult(name, worst, tolerance)


def spot_check_gradients(name: str, loss_fn, params: dict[str, Tensor],
                         n_samples: int, rng: np.random.Generator,
                         tolerance: float) -> CheckResult:
    """Like check_gradients but only on n_samples randomly chosen entries."""
    for p in params.values():
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    names = sorted(params)
    worst = 0.0
    for _ in range(n_samples):
        pname = names[int(rng.integers(len(names)))]
        p = params[pname]
        i = int(rng.integers(p.data.size))
        analytic = 0.0 if p.grad is None else float(p.grad.reshape(-1)[i])
        numeric = numeric_grad_entry(loss_fn, p.data.reshape(-1), i)
        worst = max(worst, rel_error(analytic, numeric))
    return CheckResult(name, worst, tolerance)


def _rand(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _loss_of(t: Tensor) -> Tensor:
    return ops.sum_sq(t)


def layer_checks(seed: int = 0) -> list[CheckResult]:
    """Gradient checks for every layer primitive, one result per op."""
    results = []
    streams = iter(np.random.SeedSequence(seed).spawn(32))

    def next_rng():
        return np.random.default_rng(next(streams))

    rng = next_rng()
    a, b = _rand(rng, 4, 3), _rand(rng, 4, 3)
    results.append(check_gradients(
        "elementwise-add", lambda: _loss_of(ops.add(a, b)), {"a": a, "b": b}, 1e-7))
    results.append(check_gradients(
        "elementwise-mul", lambda: _loss_of(ops.mul(a, b)), {"a": a, "b": b}, 1e-7))

    rng = next_rng()
    m, nmat = _rand(rng, 3, 4), _rand(rng, 4, 2)
    results.append(check_gradients(
        "matmul", lambda: _loss_of(ops.matmul(m, nmat)), {"a": m, "b": nmat}, 1e-7))

    rng = next_rng()
    x, w, bias = _rand(rng, 5, 4), _rand(rng, 4, 3), _rand(rng, 3)
    results.append(check_gradients(
        "linear", lambda: _loss_of(ops.linear(x, w, bias)),
        {"x": x, "w": w, "b": bias}, 1e-7))

    rng = next_rng()
    act_in = Tensor(rng.uniform(-2, 2, (3, 5)) + 0.3, requires_grad=True)
    for kind in ("relu", "tanh", "sigmoid"):
        results.append(check_gradients(
            f"activation-{kind}", lambda k=kind: _loss_of(ops.activation(act_in, k)),
            {"x": act_in}, 1e-7))

    rng = next_rng()
    cx = _rand(rng, 2, 8)
    cw, cb = _rand(rng, 3, 2, 3), _rand(rng, 3)
    results.append(check_gradients(
        "conv1d", lambda: _loss_of(ops.conv1d(cx, cw, cb)),
        {"x": cx, "w": cw, "b": cb}, 1e-6))

    rng = next_rng()
    px = _rand(rng, 1, 2, 9)
    results.append(check_gradients(
        "maxpool1d", lambda: _loss_of(ops.maxpool1d(px)), {"x": px}, 1e-6))

    rng = next_rng()
    bx = _rand(rng, 3, 2, 5)
    gamma = Tensor(rng.uniform(0.5, 1.5, 2), requires_grad=True)
    beta = _rand(rng, 2)

    def bn_loss():
        state = ops.BnState.fresh(2, dtype=np.float64)
        return _loss_of(ops.batchnorm1d(bx, gamma, beta, state, "train"))

    results.append(check_gradients(
        "batchnorm1d", bn_loss, {"x": bx, "gamma": gamma, "beta": beta}, 1e-4))

    rng = next_rng()
    dx = _rand(rng, 4, 6)
    drop_seed = int(rng.integers(2**32))

    def dropout_loss():
        frozen = np.random.default_rng(np.random.Philox(key=drop_seed))
        return _loss_of(ops.dropout(dx, 0.5, "train", frozen))

    results.append(check_gradients("dropout", dropout_loss, {"x": dx}, 1e-7))

    rng = next_rng()
    logits = _rand(rng, 4, 5)
    labels = rng.integers(0, 5, 4)
    results.append(check_gradients(
        "softmax-crossentropy",
        lambda: ops.softmax_crossentropy(logits, labels)[0],
        {"logits": logits}, 1e-7))

    rng = next_rng()
    sx = _rand(rng, 3, 6)
    results.append(check_gradients(
        "softmax", lambda: _loss_of(ops.softmax(sx, axis=1)), {"x": sx}, 1e-7))

    rng = next_rng()
    h = 3
    cell_params = LstmParams(
        _rand(rng, 2, 4 * h), _rand(rng, h, 4 * h), _rand(rng, 4 * h))
    seq = [_rand(rng, 2, 2) for _ in range(4)]

    def lstm_unroll_loss():
        state = zero_state(2, h, np.float64)
        for x_t in seq:
            state = lstm_cell(x_t, state, cell_params)
        return _loss_of(state.hidden)

    results.append(check_gradients(
        "lstm-cell-4-steps", lstm_unroll_loss,
        {"w_x": cell_params.w_x, "w_h": cell_params.w_h, "b": cell_params.b,
         **{f"x{t}": s for t, s in enumerate(seq)}},
        1e-4))

    rng = next_rng()
    z = _rand(rng, 2, 5, 3)
    fw = LstmParams(_rand(rng, 3, 8), _rand(rng, 2, 8), _rand(rng, 8))
    bw = LstmParams(_rand(rng, 3, 8), _rand(rng, 2, 8), _rand(rng, 8))
    results.append(check_gradients(
        "bilstm", lambda: _loss_of(bilstm_forward(z, fw, bw)),
        {"z": z, "fw.w_x": fw.w_x, "fw.w_h": fw.w_h, "fw.b": fw.b,
         "bw.w_x": bw.w_x, "bw.w_h": bw.w_h, "bw.b": bw.b},
        1e-4))

    rng = next_rng()
    ah = _rand(rng, 2, 4, 3)
    attn = AttentionParams(_rand(rng, 3), Tensor(rng.standard_normal(()), requires_grad=True))
    results.append(check_gradients(
        "attention", lambda: _loss_of(attention_forward(ah, attn)),
        {"h": ah, "w": attn.weights, "b": attn.bias}, 1e-6))

    return results


def model_check(seed: int = 0, n_samples: int = 5,
                tolerance: float = 1e-3) -> CheckResult:
    """End-to-end check of a reduced-width network in 64-bit.

    Spot-checks n_samples randomly chosen parameter entries against central
    differences through the full forward (train-mode batch norm, dropout
    disabled so the function is deterministic).
    """
    from ..model.config import QslaConfig
    from ..model.network import build_model

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    config = QslaConfig(num_classes=3, width_scale=1 / 16, dropout_p=0.0,
                        input_length=33)
    model = build_model("qsla", config, dtype=np.float64, seed=seed)
    batch = rng.standard_normal((2, 2, config.input_length))
    labels = rng.integers(0, config.num_classes, 2)

    def loss_fn():
        logits = model.forward_iq(batch, mode="train")
        loss, _ = ops.softmax_crossentropy(logits, labels)
        return ops.add(loss, model.l2_penalty())

    return spot_check_gradients(
        "qsla-reduced-width", loss_fn, model.parameters(), n_samples,
        np.random.default_rng(np.random.SeedSequence(seed + 1)), tolerance)
