"""Reverse-mode autodiff core: tensors, the gradient tape, and elementwise ops.

Training runs in float32; float64 is used when checking gradients numerically.
Only the operations the network actually needs are implemented, and binary ops
require matching shapes (scalars are promoted) -- there is no general
broadcasting.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class AutogradError(Exception):
    """Raised for misuse of the tape or malformed operands."""


def _coerce(data, dtype=None) -> np.ndarray:
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    if isinstance(data, (np.ndarray, np.generic)) and data.dtype in _FLOAT_DTYPES:
        return np.asarray(data)
    return np.asarray(data, dtype=DEFAULT_DTYPE)


class Tensor:
    """Dense real array, optionally tracked by the active gradient tape.

    ``grad`` is populated (for leaves reachable from the loss) by
    ``backward``; it always matches ``data`` in shape and dtype.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _coerce(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype.name}{flag})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise AutogradError("division is only supported by a plain scalar")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)


class _Op:
    """One recorded operation: output node, inputs, and the backward rule."""

    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: Sequence[Tensor], backward):
        self.out = out
        self.inputs = tuple(inputs)
        self.backward = backward


class Tape:
    """Execution-ordered record of operations for one forward pass.

    Ops are appended as they run, so the list is already topologically
    sorted; ``backward`` walks it once in reverse. A tape is single-use:
    after ``backward`` it is cleared and refuses further work.
    """

    def __init__(self):
        self._ops: list[_Op] = []
        self._produced: set[int] = set()
        self._consumed = False

    def __len__(self) -> int:
        return len(self._ops)

    def __enter__(self) -> "Tape":
        _STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _STACK.pop()
        assert popped is self
        return False


_STACK: list[Optional[Tape]] = []


def _active_tape() -> Optional[Tape]:
    return _STACK[-1] if _STACK else None


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording inside the block, even if a tape is open."""
    _STACK.append(None)
    try:
        yield
    finally:
        _STACK.pop()


def record(out: Tensor, inputs: Sequence[Tensor],
           backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Register ``out = op(inputs)`` on the active tape, if any.

    ``backward`` maps the output gradient to one gradient per input (None
    for inputs that do not need one).
    """
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        if tape._consumed:
            raise AutogradError("tape was already consumed by backward()")
        out.requires_grad = True
        tape._ops.append(_Op(out, inputs, backward))
        tape._produced.add(id(out))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

    The tape is cleared afterwards; calling backward on it again raises.
    """
    if tape._consumed:
        raise AutogradError("backward() called twice on the same tape")
    if loss.size != 1:
        raise AutogradError(f"backward() needs a scalar loss, got shape {tuple(loss.shape)}")
    if id(loss) not in tape._produced:
        raise AutogradError("loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for op in reversed(tape._ops):
        g = grads.pop(id(op.out), None)
        if g is None:
            continue
        input_grads = op.backward(g)
        for t, ig in zip(op.inputs, input_grads):
            if ig is None or not t.requires_grad:
                continue
            tid = id(t)
            if tid in grads:
                grads[tid] = grads[tid] + ig
            else:
                grads[tid] = ig
            if tid not in tape._produced:
                leaves[tid] = t

    for tid, t in leaves.items():
        g = grads[tid]
        if g.shape != t.data.shape:
            raise AutogradError(f"gradient shape {g.shape} != tensor shape {t.data.shape}")
        t.grad = g if t.grad is None else t.grad + g

    tape._ops.clear()
    tape._produced.clear()
    tape._consumed = True


def assert_finite(x: Tensor, what: str = "tensor") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise AutogradError(f"non-finite values in {what}")
    return x


# -- elementwise / reduction ops ------------------------------------------

def _as_pair(a, b) -> tuple[Tensor, Tensor]:
    """Promote plain scalars to constant tensors matching the other operand."""
    if not isinstance(a, Tensor):
        a = Tensor(np.full_like(b.data, a))
    elif not isinstance(b, Tensor):
        b = Tensor(np.full_like(a.data, b))
    if a.data.shape != b.data.shape:
        raise AutogradError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    if a.data.dtype != b.data.dtype:
        raise AutogradError(f"dtype mismatch: {a.data.dtype} vs {b.data.dtype}")
    return a, b


def add(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    out = Tensor(a.data + b.data)
    return record(out, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    out = Tensor(a.data - b.data)
    return record(out, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    out = Tensor(a.data * b.data)
    return record(out, (a, b), lambda g: (g * b.data, g * a.data))


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return record(out, (a,), lambda g: (-g,))


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data)
    return record(out, (a,), lambda g: (g * (2.0 * a.data),))


def tsum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = Tensor(a.data.sum())
    return record(out, (a,), lambda g: (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=True),))


def tmean(a: Tensor) -> Tensor:
    """Mean of all elements, as a scalar tensor."""
    n = a.data.size
    if n == 0:
        raise AutogradError("mean of an empty tensor")
    out = Tensor(a.data.sum() / n)
    return record(out, (a,), lambda g: ((np.broadcast_to(g, a.data.shape) / n).astype(a.data.dtype),))


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    return record(out, (a,), lambda g: (g.reshape(a.data.shape),))


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    return record(out, (a,), lambda g: (g * (a.data > 0),))


def sigmoid(a: Tensor) -> Tensor:
    """Logistic function 1 / (1 + exp(-x)), stable for large |x|."""
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    out = Tensor(y)
    return record(out, (a,), lambda g: (g * (y * (1.0 - y)),))


def tabs(a: Tensor) -> Tensor:
    """Elementwise |x|; the gradient at exactly zero is taken as zero."""
    sgn = np.sign(a.data)
    out = Tensor(sgn * a.data)
    return record(out, (a,), lambda g: (g * sgn,))
