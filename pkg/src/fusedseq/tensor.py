"""Dense float64 tensors with a reverse-mode gradient tape.

Every array in the toolkit is a Tensor wrapping a numpy float64 ndarray.
Operations build a tape of backward closures; calling backward() on a
scalar loss accumulates gradients into every reachable Tensor that has
requires_grad set.  The tape is rebuilt on every forward pass, there is
no persistent graph.

Gradient recording can be suspended with no_grad() (decoding, evaluation).
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Sequence

import numpy as np

from .exceptions import NumericError, ShapeError

# When True (default) every op asserts its output is finite, which is the
# Tensor invariant.  Costs little at desk scale.
CHECK_FINITE = True

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Suspend tape construction inside the with-block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def _all_finite(arr: np.ndarray) -> bool:
    # the sum is NaN/Inf iff some entry is (values here never overflow),
    # and it is far cheaper than materializing an isfinite mask
    return math.isfinite(float(arr.sum()))


class Tensor:
    """A float64 ndarray plus gradient bookkeeping.

    data is row-major and immutable by convention once produced by an op.
    grad has the same shape as data and is lazily allocated.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if CHECK_FINITE and not _all_finite(arr):
            raise NumericError("tensor initialized with non-finite entries")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def to_list(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"

    # -- gradient plumbing ---------------------------------------------------

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            # copy: g may be a view into another node's gradient
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from this scalar through the recorded tape."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    """Wrap an op result, attaching tape state when recording is on."""
    if CHECK_FINITE and not _all_finite(data):
        raise NumericError("operation produced non-finite entries")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._parents = ()
    out._backward = None
    out.requires_grad = False
    if _grad_enabled:
        needed = tuple(p for p in parents if p.requires_grad)
        if needed:
            out.requires_grad = True
            out._parents = needed
            out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise ShapeError("matmul needs at least 1-d operands")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.data.shape} vs {b.data.shape}"
        )
    data = a.data @ b.data

    def backward(g):
        if a.data.ndim == 1 and b.data.ndim == 1:
            if a.requires_grad:
                a.accumulate_grad(g * b.data)
            if b.requires_grad:
                b.accumulate_grad(g * a.data)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            if a.requires_grad:
                a.accumulate_grad(np.outer(g, b.data))
            if b.requires_grad:
                b.accumulate_grad(a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            if a.requires_grad:
                a.accumulate_grad(g @ b.data.T)
            if b.requires_grad:
                b.accumulate_grad(np.outer(a.data, g))
        else:
            if a.requires_grad:
                a.accumulate_grad(g @ b.data.T)
            if b.requires_grad:
                b.accumulate_grad(a.data.T @ g)

    return _make(data, (a, b), backward)


def linear(w: Tensor, b: Tensor, x: Tensor) -> Tensor:
    """w @ x + b with shape checking; the affine block used everywhere."""
    w, b, x = as_tensor(w), as_tensor(b), as_tensor(x)
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ShapeError(
            f"linear: weight {w.data.shape} incompatible with input {x.data.shape}"
        )
    if b.data.shape != (w.data.shape[0],):
        raise ShapeError(
            f"linear: bias {b.data.shape} incompatible with weight {w.data.shape}"
        )
    return add(matmul(w, x), b)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p.accumulate_grad(g[tuple(idx)])

    return _make(data, parts, backward)


def take(x: Tensor, indices) -> Tensor:
    """Gather along the first axis; backward scatter-adds."""
    x = as_tensor(x)
    idx = np.asarray(indices)
    data = x.data[idx]

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, idx, g)
            x.accumulate_grad(acc)

    return _make(data, (x,), backward)


def stack(parts: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape vectors into a matrix, one row per part."""
    parts = [as_tensor(p) for p in parts]
    data = np.stack([p.data for p in parts])

    def backward(g):
        for i, p in enumerate(parts):
            if p.requires_grad:
                p.accumulate_grad(g[i])

    return _make(data, parts, backward)


def pick(x: Tensor, index: int) -> Tensor:
    """Select one entry of a vector as a scalar tensor."""
    x = as_tensor(x)
    if x.data.ndim != 1:
        raise ShapeError(f"pick expects a vector, got {x.data.shape}")
    data = np.asarray(x.data[index])

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            acc[index] = g
            x.accumulate_grad(acc)

    return _make(data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.asarray(x.data.sum())

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, float(g)))

    return _make(data, (x,), backward)


def tmean(x: Tensor) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    data = np.asarray(x.data.mean())

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, float(g) / n))

    return _make(data, (x,), backward)


def mean_of(parts: Sequence[Tensor]) -> Tensor:
    """Arithmetic mean of scalar tensors, summed in list order."""
    acc = parts[0]
    for p in parts[1:]:
        acc = add(acc, p)
    return mul(acc, 1.0 / len(parts))


def weighted_sum(x: Tensor, weights: Tensor) -> Tensor:
    """weights (T,) against rows of x (T, e): expectation over rows."""
    return matmul(weights, x)


# -- activations ----------------------------------------------------------------


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    # tanh form is stable in both tails and avoids masked exponentials
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * out * (1.0 - out))

    return _make(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out * out))

    return _make(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * (x.data > 0.0))

    return _make(out, (x,), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=-1, keepdims=True)
            x.accumulate_grad(out * (g - dot))

    return _make(out, (x,), backward)


def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax along the last axis, computed stably."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse

    def backward(g):
        if x.requires_grad:
            p = np.exp(out)
            x.accumulate_grad(g - p * g.sum(axis=-1, keepdims=True))

    return _make(out, (x,), backward)


_ACTIVATIONS = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax": softmax,
    "log_softmax": log_softmax,
}


def activation(kind: str, x: Tensor) -> Tensor:
    """Apply one of sigmoid|tanh|relu|softmax|log_softmax by name."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind: {kind!r}") from None
    return fn(x)
