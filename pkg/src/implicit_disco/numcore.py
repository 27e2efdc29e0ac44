"""Dense float64 tensors with a reverse-mode differentiation tape.

Operations record themselves on the tape that is active in the current
thread (see :class:`Tape`).  Outside of a ``with Tape():`` block they just
compute values, which is what prediction uses.

>>> W = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
>>> with Tape() as tape:
...     y = affine(W, Tensor([1.0, 1.0]), Tensor([1.0, 0.0]))
...     loss = total(y)
>>> grads = tape.backward(loss, [W])
>>> grads[0].tolist()
[[1.0, 1.0], [1.0, 1.0]]
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "DimensionError",
    "Tensor",
    "Tape",
    "active_tape",
    "affine",
    "linear",
    "add",
    "tanh",
    "sigmoid",
    "mul",
    "elementwise",
    "pool",
    "softmax",
    "softmax_cross_entropy",
    "total",
    "finite_difference_gradients",
    "max_relative_error",
]


class DimensionError(ValueError):
    """Raised when operand shapes do not conform."""


class Tensor:
    """A float64 array, optionally tracked as a differentiable leaf."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape})"

    def numpy(self) -> np.ndarray:
        return self.data

    def tolist(self):
        return self.data.tolist()


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_local = threading.local()


def active_tape() -> Optional["Tape"]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered log of primitive operations for one forward pass.

    A tape belongs to the thread that entered it.  Independent tapes in
    different threads never share state.
    """

    def __init__(self):
        self.records: List[_Record] = []

    def __enter__(self) -> "Tape":
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def record(self, out: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> None:
        self.records.append(_Record(out, inputs, backward))

    def _tensors(self) -> Iterable[Tensor]:
        for rec in self.records:
            yield rec.out
            yield from rec.inputs

    def backward(self, loss: Tensor, params: Sequence[Tensor] = ()) -> List[np.ndarray]:
        """Fill ``.grad`` of every tensor on the tape with d(loss)/d(tensor).

        Returns the gradients of ``params`` in order; a parameter that does
        not influence the loss gets an exact zero array.
        """
        if loss.data.size != 1:
            raise DimensionError(f"loss must be a scalar, got shape {loss.shape}")
        if not any(rec.out is loss for rec in self.records):
            raise ValueError("loss tensor was not produced on this tape")
        for t in self._tensors():
            t.grad = np.zeros_like(t.data)
        for p in params:
            p.grad = np.zeros_like(p.data)
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self.records):
            in_grads = rec.backward(rec.out.grad)
            for inp, g in zip(rec.inputs, in_grads):
                if g is not None:
                    inp.grad += g
        return [p.grad.copy() for p in params]


def _emit(value: np.ndarray, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = value
    out.grad = None
    out.requires_grad = False
    out.name = None
    tape = active_tape()
    if tape is not None:
        tape.record(out, inputs, backward)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def linear(terms: Sequence[Tuple[Tensor, Tensor]], b: Tensor) -> Tensor:
    """Compute ``sum_j W_j @ x_j + b`` as one recorded operation."""
    b = _as_tensor(b)
    if b.data.ndim != 1:
        raise DimensionError(f"bias must be a vector, got shape {b.shape}")
    out = b.data.copy()
    inputs: List[Tensor] = [b]
    for W, x in terms:
        W, x = _as_tensor(W), _as_tensor(x)
        if W.data.ndim != 2 or x.data.ndim != 1 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
            raise DimensionError(
                f"cannot apply weight of shape {W.shape} to input of shape {x.shape} "
                f"with bias of shape {b.shape}"
            )
        out += W.data @ x.data
        inputs.extend((W, x))
    frozen = tuple(inputs)

    def backward(g):
        grads = [g]
        for i in range(1, len(frozen), 2):
            W, x = frozen[i], frozen[i + 1]
            grads.append(np.outer(g, x.data))
            grads.append(W.data.T @ g)
        return grads

    return _emit(out, frozen, backward)


def affine(W: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """``W @ x + b``."""
    return linear([(W, x)], b)


def add(*xs: Tensor) -> Tensor:
    xs = tuple(_as_tensor(x) for x in xs)
    shape = xs[0].shape
    for x in xs[1:]:
        if x.shape != shape:
            raise DimensionError(f"cannot add shapes {shape} and {x.shape}")
    value = xs[0].data.copy()
    for x in xs[1:]:
        value += x.data
    return _emit(value, xs, lambda g: [g] * len(xs))


def tanh(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    y = np.tanh(x.data)
    return _emit(y, (x,), lambda g: [g * (1.0 - y * y)])


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    # split by sign so exp never overflows
    z = x.data
    y = np.empty_like(z)
    pos = z >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    y[~pos] = ez / (1.0 + ez)
    return _emit(y, (x,), lambda g: [g * y * (1.0 - y)])


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"elementwise mul needs equal shapes, got {a.shape} and {b.shape}")
    return _emit(a.data * b.data, (a, b), lambda g: [g * b.data, g * a.data])


_ELEMENTWISE = {"tanh": tanh, "sigmoid": sigmoid, "mul": mul}


def elementwise(fn: str, *args: Tensor) -> Tensor:
    try:
        op = _ELEMENTWISE[fn]
    except KeyError:
        raise ValueError(f"unknown elementwise function {fn!r}") from None
    return op(*args)


def pool(vectors: Sequence[Tensor], fn: str) -> Tensor:
    """Element-wise max/sum/mean over a non-empty list of equal-length vectors.

    For max, the gradient goes to the first position holding the maximum.
    """
    if len(vectors) == 0:
        raise ValueError("cannot pool an empty list of vectors")
    vectors = tuple(_as_tensor(v) for v in vectors)
    shape = vectors[0].shape
    for v in vectors:
        if v.shape != shape or v.data.ndim != 1:
            raise DimensionError(f"pooling needs equal-length vectors, got {shape} and {v.shape}")
    stacked = np.stack([v.data for v in vectors])
    n = len(vectors)
    if fn == "sum":
        return _emit(stacked.sum(axis=0), vectors, lambda g: [g] * n)
    if fn == "mean":
        return _emit(stacked.sum(axis=0) / n, vectors, lambda g: [g / n] * n)
    if fn == "max":
        winner = stacked.argmax(axis=0)
        cols = np.arange(stacked.shape[1])

        def backward(g):
            out = np.zeros_like(stacked)
            out[winner, cols] = g
            return list(out)

        return _emit(stacked[winner, cols], vectors, backward)
    raise ValueError(f"unknown pooling function {fn!r}")


def _softmax_values(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax(v: Tensor) -> Tensor:
    v = _as_tensor(v)
    if v.data.ndim != 1 or v.data.size == 0:
        raise ValueError(f"softmax needs a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v.data)):
        raise FloatingPointError("softmax input contains non-finite values")
    p = _softmax_values(v.data)

    def backward(g):
        return [p * (g - np.dot(g, p))]

    return _emit(p, (v,), backward)


def softmax_cross_entropy(logits: Tensor, gold: int) -> Tensor:
    """``-log softmax(logits)[gold]`` via log-sum-exp, never taking log(0)."""
    logits = _as_tensor(logits)
    z = logits.data
    if z.ndim != 1 or z.size == 0:
        raise ValueError(f"logits must be a non-empty vector, got shape {logits.shape}")
    if not 0 <= gold < z.size:
        raise IndexError(f"gold index {gold} out of range for {z.size} labels")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    loss = np.array(lse - z[gold])

    def backward(g):
        grad = _softmax_values(z)
        grad[gold] -= 1.0
        return [g * grad]

    return _emit(loss, (logits,), backward)


def total(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    return _emit(np.array(x.data.sum()), (x,), lambda g: [np.full_like(x.data, g)])


def finite_difference_gradients(
    loss_fn: Callable[[], float], params: Sequence[Tensor], eps: float = 1e-4
) -> List[np.ndarray]:
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params``.

    ``loss_fn`` must read the parameters' current ``.data``; entries are
    perturbed in place and restored.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def max_relative_error(a: Sequence[np.ndarray], b: Sequence[np.ndarray], floor: float = 1e-6) -> float:
    """Largest element-wise ``|a-b| / max(|a|, |b|, floor)`` across arrays."""
    worst = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        if x.size:
            worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst
