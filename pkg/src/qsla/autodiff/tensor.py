"""Reverse-mode autodiff core: Tensor values and the recording Tape.

Graphs are built by the functional ops in this package. Each op appends a
node to the currently active tape; nodes are created in data-dependency
order, so the tape list is already topologically sorted and the backward
pass is a single reverse sweep that visits every node exactly once.

Running an op with no active tape performs a plain forward computation
(inference mode): nothing is recorded and no gradient buffers are touched.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, ShapeError

# Dtypes supported by the engine: float32 for training, float64 for
# finite-difference gradient checking. Both run through the same op code.
SUPPORTED_DTYPES = (np.float32, np.float64)

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle finite-value assertions after every forward op."""
    global _debug_checks
    _debug_checks = bool(enabled)


def debug_checks_enabled() -> bool:
    return _debug_checks


class Tensor:
    """An n-dimensional float array participating in a recorded graph.

    `data` is always a numpy array (float32 or float64). `grad` is lazily
    allocated with the same shape/dtype the first time a gradient is
    accumulated into this tensor.
    """

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        """Add a gradient contribution; fan-out contributions sum here."""
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def accumulate_grad_at(self, idx, g: np.ndarray) -> None:
        """Add a contribution to one slice (for ops that route gradients to
        a sub-range); cheaper than materializing a full-size buffer."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad[idx] += g

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype.name}," \
               f" requires_grad={self.requires_grad}{tag})"


class _Node:
    """One recorded operation: its output and a closure applying the chain rule."""

    __slots__ = ("out", "backward_fn")

    def __init__(self, out: Tensor, backward_fn):
        self.out = out
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of operations, usable as a context manager.

    Nodes are appended in creation order, which guarantees every node's
    operands precede it. `backward` sweeps the list once in reverse.
    """

    _active: "Tape | None" = None

    def __init__(self):
        self._nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise RuntimeError("nested tapes are not supported")
        Tape._active = self
        return self

    def __exit__(self, exc_type, exc, tb):
        Tape._active = None
        return False

    @staticmethod
    def active() -> "Tape | None":
        return Tape._active

    def __len__(self):
        return len(self._nodes)

    def record(self, out: Tensor, backward_fn) -> None:
        self._nodes.append(_Node(out, backward_fn))

    def backward(self, loss: Tensor) -> "Tape":
        """Populate .grad on every reachable requires_grad tensor.

        `loss` must be a scalar produced on this tape (or a leaf scalar).
        Returns the tape itself so callers can chain on it.
        """
        if loss.size != 1:
            raise ShapeError(
                f"backward requires a scalar loss, got shape {tuple(loss.shape)}"
            )
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            g = node.out.grad
            if g is None:
                continue
            node.backward_fn(g)
        return self


def backward(loss: Tensor) -> Tape:
    """Run the backward sweep of the active tape from `loss`."""
    tape = Tape.active()
    if tape is None:
        raise RuntimeError("backward called with no active tape")
    return tape.backward(loss)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def record_op(data: np.ndarray, parents, backward_fn) -> Tensor:
    """Create an op output, recording it on the active tape when needed.

    The node is recorded only when a tape is active and at least one parent
    requires a gradient; otherwise this is a plain forward value.
    """
    if _debug_checks and not np.all(np.isfinite(data)):
        raise NumericalError("non-finite values produced by a forward op")
    requires = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    tape = Tape.active()
    if tape is not None and requires and backward_fn is not None:
        tape.record(out, backward_fn)
    return out
