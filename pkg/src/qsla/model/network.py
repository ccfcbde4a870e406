"""Network assembly for the QSLA family and the small reference CNN.

The three QSLA-family variants share one spatial front end (four
convolutional streams, pointwise I/Q fusion, early fusion, two high-level
conv blocks with pooling); they differ only in the temporal block:

    qsla            BiLSTM -> attention
    only-bilstm     BiLSTM -> BiLSTM
    only-attention  attention -> attention (directly on the conv features)

The classifier head flattens the temporal output time-major-then-feature
and applies a single dense softmax layer; the L2 penalty covers only that
dense layer's weight matrix (coefficient * ||W||^2, gradient 2*coeff*W).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..autodiff import ops
from ..autodiff.attention import AttentionParams, attention_forward
from ..autodiff.ops import BnState
from ..autodiff.recurrent import LstmParams, bilstm_forward
from ..autodiff.tensor import Tensor
from ..errors import ConfigError, FingerprintError, ShapeError
from ..signal.frames import quad_views_batch
from .config import QslaConfig, check_variant, fingerprint
from .manifest import WeightManifest

_MASK64 = (1 << 64) - 1


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


class ConvBnRelu:
    """Conv1D (same padding) + batch norm + ReLU."""

    def __init__(self, name, c_in, c_out, kernel, rng, dtype):
        self.name = name
        w = _glorot(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel, dtype)
        self.w = Tensor(w, requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")
        self.gamma = Tensor(np.ones(c_out, dtype=dtype), requires_grad=True,
                            name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True,
                           name=f"{name}.beta")
        self.bn = BnState.fresh(c_out, dtype=dtype)

    def __call__(self, x, mode):
        y = ops.conv1d(x, self.w, self.b)
        y = ops.batchnorm1d(y, self.gamma, self.beta, self.bn, mode)
        return ops.relu(y)

    def params(self):
        return OrderedDict(
            [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b),
             (f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]
        )

    def states(self):
        return {self.name: self.bn}


class ConvRelu:
    """Plain Conv1D + ReLU (reference CNN building block)."""

    def __init__(self, name, c_in, c_out, kernel, rng, dtype):
        self.name = name
        w = _glorot(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel, dtype)
        self.w = Tensor(w, requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")

    def __call__(self, x, mode):
        return ops.relu(ops.conv1d(x, self.w, self.b))

    def params(self):
        return OrderedDict([(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)])

    def states(self):
        return {}


class Dense:
    def __init__(self, name, n_in, n_out, rng, dtype):
        self.name = name
        self.w = Tensor(_glorot(rng, (n_in, n_out), n_in, n_out, dtype),
                        requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")

    def __call__(self, x):
        return ops.linear(x, self.w, self.b)

    def params(self):
        return OrderedDict([(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)])

    def states(self):
        return {}


class BiLstm:
    """Two opposite-direction LSTMs; per-step outputs concatenated.

    Projections are uniform +/- 1/sqrt(cells); biases start at zero except
    the forget-gate block, which starts at one.
    """

    def __init__(self, name, input_size, cells, rng, dtype):
        self.name = name
        self.cells = cells

        def make_direction(tag):
            lim = 1.0 / np.sqrt(cells)
            w_x = Tensor(rng.uniform(-lim, lim, (input_size, 4 * cells)).astype(dtype),
                         requires_grad=True, name=f"{name}.{tag}.w_x")
            w_h = Tensor(rng.uniform(-lim, lim, (cells, 4 * cells)).astype(dtype),
                         requires_grad=True, name=f"{name}.{tag}.w_h")
            bias = np.zeros(4 * cells, dtype=dtype)
            bias[cells : 2 * cells] = 1.0
            b = Tensor(bias, requires_grad=True, name=f"{name}.{tag}.b")
            return LstmParams(w_x, w_h, b)

        self.fwd = make_direction("fwd")
        self.bwd = make_direction("bwd")

    def __call__(self, seq):
        return bilstm_forward(seq, self.fwd, self.bwd)

    def params(self):
        out = OrderedDict()
        for tag, p in (("fwd", self.fwd), ("bwd", self.bwd)):
            out[f"{self.name}.{tag}.w_x"] = p.w_x
            out[f"{self.name}.{tag}.w_h"] = p.w_h
            out[f"{self.name}.{tag}.b"] = p.b
        return out

    def states(self):
        return {}


class TimeAttention:
    """Softmax-over-time re-weighting with a learned scoring vector."""

    def __init__(self, name, dim, rng, dtype):
        self.name = name
        self.attn = AttentionParams(
            Tensor(_glorot(rng, (dim,), dim, 1, dtype), requires_grad=True,
                   name=f"{name}.w"),
            Tensor(np.zeros((), dtype=dtype), requires_grad=True, name=f"{name}.b"),
        )

    def __call__(self, seq):
        return attention_forward(seq, self.attn)

    def params(self):
        return OrderedDict(
            [(f"{self.name}.w", self.attn.weights), (f"{self.name}.b", self.attn.bias)]
        )

    def states(self):
        return {}


class Dropout:
    """Inverted dropout with a counter-based stream: mask k of a run is a
    pure function of (seed, k), so fixed seeds reproduce training exactly."""

    def __init__(self, p, seed=0):
        self.p = p
        self.seed = seed
        self.calls = 0

    def reseed(self, seed):
        self.seed = seed
        self.calls = 0

    def __call__(self, x, mode):
        if mode != "train" or self.p == 0.0:
            return x
        rng = np.random.default_rng(
            np.random.Philox(key=[self.seed & _MASK64, self.calls])
        )
        self.calls += 1
        return ops.dropout(x, self.p, mode, rng)

    def params(self):
        return OrderedDict()

    def states(self):
        return {}


@dataclass
class Prediction:
    """Class probabilities (simplex vector) and the argmax class id."""

    probs: np.ndarray

    @property
    def label(self) -> int:
        return int(np.argmax(self.probs))


@dataclass
class ParamCounts:
    per_layer: "OrderedDict[str, int]"
    total: int
    total_without_bn: int


class Model:
    """A built network: layers, parameters, and forward passes."""

    def __init__(self, variant: str, config: QslaConfig,
                 dtype=np.float32, seed: int = 0):
        self.variant = check_variant(variant)
        self.config = config
        self.dtype = np.dtype(dtype).type
        self.seed = seed
        rng = np.random.default_rng(
            np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
        )
        self._layers: "OrderedDict[str, object]" = OrderedDict()
        f = config.filters
        h = config.cells
        t_len = config.pooled_length
        c = config.num_classes
        add = self._add_layer
        if self.variant == "refcnn":
            add("conv1", ConvRelu("conv1", 2, 64, 3, rng, self.dtype))
            add("conv2", ConvRelu("conv2", 64, 64, 3, rng, self.dtype))
            flat = 64 * (config.input_length // 3 // 3)
            add("dense1", Dense("dense1", flat, 128, rng, self.dtype))
            add("dense2", Dense("dense2", 128, c, rng, self.dtype))
            self._head_dense = self._layers["dense2"]
        else:
            k = config.conv_kernel
            add("conv1", ConvBnRelu("conv1", 2, f, k, rng, self.dtype))
            add("conv2", ConvBnRelu("conv2", 2, f, k, rng, self.dtype))
            add("conv3", ConvBnRelu("conv3", 1, f, k, rng, self.dtype))
            add("conv4", ConvBnRelu("conv4", 1, f, k, rng, self.dtype))
            add("conv5", ConvBnRelu("conv5", 2 * f, f, config.fusion_kernel, rng,
                                    self.dtype))
            add("conv6", ConvBnRelu("conv6", 3 * f, f, k, rng, self.dtype))
            add("conv7", ConvBnRelu("conv7", f, f, k, rng, self.dtype))
            if self.variant == "qsla":
                add("bilstm", BiLstm("bilstm", f, h, rng, self.dtype))
                add("attention", TimeAttention("attention", 2 * h, rng, self.dtype))
                head_in = t_len * 2 * h
            elif self.variant == "only-bilstm":
                add("bilstm", BiLstm("bilstm", f, h, rng, self.dtype))
                add("bilstm2", BiLstm("bilstm2", 2 * h, h, rng, self.dtype))
                head_in = t_len * 2 * h
            else:  # only-attention
                add("attention", TimeAttention("attention", f, rng, self.dtype))
                add("attention2", TimeAttention("attention2", f, rng, self.dtype))
                head_in = t_len * f
            add("dense", Dense("dense", head_in, c, rng, self.dtype))
            self._head_dense = self._layers["dense"]
        self.dropout = Dropout(config.dropout_p, seed)

    def _add_layer(self, name, layer):
        self._layers[name] = layer

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------
    def _front_end(self, views: dict[str, Tensor], mode: str):
        ly = self._layers
        c1 = ly["conv1"](views["a_phi"], mode)
        c2 = ly["conv2"](views["iq"], mode)
        c3 = ly["conv3"](views["i"], mode)
        c4 = ly["conv4"](views["q"], mode)
        c5 = ly["conv5"](ops.concat([c3, c4], axis=1), mode)
        fused = ops.concat([c1, c2, c5], axis=1)
        c6 = ly["conv6"](fused, mode)
        pooled = ops.maxpool1d(c6, self.config.pool_stride, self.config.pool_stride)
        zc = ly["conv7"](pooled, mode)
        return ops.swap_axes(zc, 1, 2)  # (N, T, F)

    def forward_views(self, views: dict[str, np.ndarray], mode: str) -> Tensor:
        """Logits for a batch given the four preprocessed views."""
        if mode not in ("train", "eval"):
            raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
        tv = {
            k: Tensor(np.ascontiguousarray(v, dtype=self.dtype))
            for k, v in views.items()
        }
        ly = self._layers
        if self.variant == "refcnn":
            x = ly["conv1"](tv["iq"], mode)
            x = ops.maxpool1d(x, 3, 3)
            x = ly["conv2"](x, mode)
            x = ops.maxpool1d(x, 3, 3)
            n = x.shape[0]
            x = ops.reshape(x, (n, x.shape[1] * x.shape[2]))
            x = ops.relu(ly["dense1"](x))
            x = self.dropout(x, mode)
            return ly["dense2"](x)
        seq = self._front_end(tv, mode)
        if self.variant == "qsla":
            hidden = ly["bilstm"](seq)
            hidden = ly["attention"](hidden)
        elif self.variant == "only-bilstm":
            hidden = ly["bilstm"](seq)
            hidden = ly["bilstm2"](hidden)
        else:
            hidden = ly["attention"](seq)
            hidden = ly["attention2"](hidden)
        hidden = self.dropout(hidden, mode)
        n, t_len, d = hidden.shape
        flat = ops.reshape(hidden, (n, t_len * d))  # time-major, then feature
        return self._layers["dense"](flat)

    def forward_iq(self, iq: np.ndarray, mode: str) -> Tensor:
        """Logits for a raw (N, 2, L) batch (preprocessing included)."""
        iq = np.asarray(iq)
        if iq.ndim != 3 or iq.shape[1] != 2 or iq.shape[2] != self.config.input_length:
            raise ShapeError(
                f"expected (N, 2, {self.config.input_length}) input, got {iq.shape}"
            )
        return self.forward_views(quad_views_batch(iq.astype(self.dtype)), mode)

    def predict(self, iq: np.ndarray) -> list[Prediction]:
        """Eval-mode predictions; deterministic, order-preserving."""
        logits = self.forward_iq(iq, "eval").data
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        return [Prediction(p) for p in probs]

    def l2_penalty(self) -> Tensor:
        """l2_coeff * ||W||^2 on the classifier dense weights only."""
        return ops.mul(ops.sum_sq(self._head_dense.w), float(self.config.l2_coeff))

    # ------------------------------------------------------------------
    # parameters, accounting, serialization
    # ------------------------------------------------------------------
    def parameters(self) -> "OrderedDict[str, Tensor]":
        out = OrderedDict()
        for layer in self._layers.values():
            out.update(layer.params())
        return out

    def bn_states(self) -> dict[str, BnState]:
        out = {}
        for layer in self._layers.values():
            out.update(layer.states())
        return out

    def zero_grads(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def count_params(self) -> ParamCounts:
        """Trainable counts per layer and in total (running stats excluded)."""
        per_layer = OrderedDict()
        total = 0
        bn_total = 0
        for lname, layer in self._layers.items():
            n = 0
            for pname, p in layer.params().items():
                n += p.size
                if pname.endswith(".gamma") or pname.endswith(".beta"):
                    bn_total += p.size
            per_layer[lname] = n
            total += n
        return ParamCounts(per_layer, total, total - bn_total)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.variant, self.config)

    def manifest(self) -> WeightManifest:
        m = WeightManifest(self.variant, self.config)
        for name, p in self.parameters().items():
            m.add(name, p.data)
        for name, state in self.bn_states().items():
            m.add(f"{name}.bn.mean", state.mean)
            m.add(f"{name}.bn.var", state.var)
            m.add(f"{name}.bn.updates", np.array([state.updates], dtype=np.float32))
        return m

    def memory_footprint(self) -> int:
        """Serialized manifest size in bytes."""
        return len(self.manifest().to_bytes())

    def load_manifest(self, m: WeightManifest) -> None:
        if m.fingerprint != self.fingerprint:
            raise FingerprintError(
                f"manifest fingerprint {m.fingerprint} does not match model"
                f" {self.fingerprint} (variant/config differ)"
            )
        params = self.parameters()
        states = self.bn_states()
        expected = set(params)
        for name in states:
            expected |= {f"{name}.bn.mean", f"{name}.bn.var", f"{name}.bn.updates"}
        if set(m.tensors) != expected:
            missing = expected - set(m.tensors)
            extra = set(m.tensors) - expected
            raise FingerprintError(
                f"manifest tensor names mismatch (missing {sorted(missing)},"
                f" extra {sorted(extra)})"
            )
        for name, p in params.items():
            arr = m.tensors[name]
            if arr.shape != p.data.shape:
                raise FingerprintError(
                    f"tensor {name}: manifest shape {arr.shape} vs model"
                    f" {p.data.shape}"
                )
            p.data = arr.astype(self.dtype)
        for name, state in states.items():
            state.mean = m.tensors[f"{name}.bn.mean"].astype(self.dtype)
            state.var = m.tensors[f"{name}.bn.var"].astype(self.dtype)
            state.updates = int(m.tensors[f"{name}.bn.updates"][0])

    # ------------------------------------------------------------------
    # in-memory snapshots (early stopping)
    # ------------------------------------------------------------------
    def snapshot(self) -> dict:
        return {
            "params": {k: p.data.copy() for k, p in self.parameters().items()},
            "bn": {k: s.copy() for k, s in self.bn_states().items()},
        }

    def restore(self, snap: dict) -> None:
        for k, p in self.parameters().items():
            p.data = snap["params"][k].copy()
        for k, s in self.bn_states().items():
            saved = snap["bn"][k]
            s.mean = saved.mean.copy()
            s.var = saved.var.copy()
            s.updates = saved.updates


def build_model(variant: str, config: QslaConfig, dtype=np.float32,
                seed: int = 0) -> Model:
    return Model(variant, config, dtype=dtype, seed=seed)
