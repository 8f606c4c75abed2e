"""Reverse-mode automatic differentiation over dense float64 arrays.

Each operation returns a new Tensor wired to its inputs together with a
closure that routes the upstream gradient to them. `backward` walks the
graph once in reverse topological order, so gradients accumulate
correctly across shared subexpressions. Values follow numpy broadcasting;
gradients are summed back to the original operand shapes.

Graphs are built fresh per forward pass. Calling `backward` twice on
tensors from the same forward pass double-counts intermediate gradients,
so build a new graph instead (parameters persist, graphs do not).
"""

from __future__ import annotations

from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ContractError, DimensionError, NumericDomainError

__all__ = [
    "Tensor",
    "apply",
    "backward",
    "grad_check",
    "add",
    "subtract",
    "multiply",
    "matmul",
    "relu",
    "leaky_relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "absolute",
    "clip",
    "softmax",
    "log_softmax",
    "tsum",
    "tmean",
    "sq_l2_norm",
    "l1_norm",
    "concat",
    "take_rows",
    "transpose",
    "reshape",
]


class Tensor:
    """A float64 array plus a gradient slot and graph linkage.

    `data` is the value, `grad` is filled by `backward`, `_parents` and
    `_backward` describe how the value was produced. Leaf tensors have no
    parents and a no-op backward.
    """

    __slots__ = ("data", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, parents: Tuple["Tensor", ...] = (), op: str = ""):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = parents
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op: str = op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A constant copy of this value, severed from the graph."""
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f" op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return subtract(self, _wrap(other))

    def __rsub__(self, other):
        return subtract(_wrap(other), self)

    def __mul__(self, other):
        return multiply(self, _wrap(other))

    def __rmul__(self, other):
        return multiply(_wrap(other), self)

    def __neg__(self):
        return multiply(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    grad = _unbroadcast(np.asarray(grad, dtype=np.float64), t.data.shape)
    t.grad = grad if t.grad is None else t.grad + grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# primitive operations


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("add", a, b)
    out = Tensor(a.data + b.data, (a, b), "add")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, g)

    out._backward = bw
    return out


def subtract(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("subtract", a, b)
    out = Tensor(a.data - b.data, (a, b), "subtract")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    out._backward = bw
    return out


def multiply(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("multiply", a, b)
    out = Tensor(a.data * b.data, (a, b), "multiply")

    def bw(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul: expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    out = Tensor(a.data @ b.data, (a, b), "matmul")

    def bw(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    out._backward = bw
    return out


def relu(x: Tensor) -> Tensor:
    x = _wrap(x)
    out = Tensor(np.maximum(x.data, 0.0), (x,), "relu")

    def bw(g):
        _accumulate(x, g * (x.data > 0.0))

    out._backward = bw
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    x = _wrap(x)
    if not 0.0 < slope < 1.0:
        raise ContractError(f"leaky_relu: slope must lie in (0, 1), got {slope}")
    out = Tensor(np.where(x.data > 0.0, x.data, slope * x.data), (x,), "leaky_relu")

    def bw(g):
        _accumulate(x, g * np.where(x.data > 0.0, 1.0, slope))

    out._backward = bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    x = _wrap(x)
    # evaluate on the numerically safe side of the exp
    pos = x.data >= 0
    z = np.exp(np.where(pos, -x.data, x.data))
    val = np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z))
    out = Tensor(val, (x,), "sigmoid")

    def bw(g):
        _accumulate(x, g * val * (1.0 - val))

    out._backward = bw
    return out


def tanh(x: Tensor) -> Tensor:
    x = _wrap(x)
    val = np.tanh(x.data)
    out = Tensor(val, (x,), "tanh")

    def bw(g):
        _accumulate(x, g * (1.0 - val * val))

    out._backward = bw
    return out


def exp(x: Tensor) -> Tensor:
    x = _wrap(x)
    val = np.exp(x.data)
    out = Tensor(val, (x,), "exp")

    def bw(g):
        _accumulate(x, g * val)

    out._backward = bw
    return out


def log(x: Tensor) -> Tensor:
    x = _wrap(x)
    if np.any(x.data <= 0.0):
        raise NumericDomainError("log: input must be strictly positive")
    out = Tensor(np.log(x.data), (x,), "log")

    def bw(g):
        _accumulate(x, g / x.data)

    out._backward = bw
    return out


def absolute(x: Tensor) -> Tensor:
    x = _wrap(x)
    out = Tensor(np.abs(x.data), (x,), "absolute")

    def bw(g):
        _accumulate(x, g * np.sign(x.data))

    out._backward = bw
    return out


def clip(x: Tensor, lo: float = -np.inf, hi: float = np.inf) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only where unclamped."""
    x = _wrap(x)
    out = Tensor(np.clip(x.data, lo, hi), (x,), "clip")
    mask = (x.data >= lo) & (x.data <= hi)

    def bw(g):
        _accumulate(x, g * mask)

    out._backward = bw
    return out


def _axis_check(op: str, x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"{op}: axis {axis} out of range for shape {x.shape}")
    return axis % x.ndim if x.ndim else 0


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _wrap(x)
    axis = _axis_check("softmax", x, axis)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    val = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(val, (x,), "softmax")

    def bw(g):
        inner = (g * val).sum(axis=axis, keepdims=True)
        _accumulate(x, val * (g - inner))

    out._backward = bw
    return out


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Fused log(softmax(x)); stable via max subtraction."""
    x = _wrap(x)
    axis = _axis_check("log_softmax", x, axis)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    val = z - lse
    soft = np.exp(val)
    out = Tensor(val, (x,), "log_softmax")

    def bw(g):
        _accumulate(x, g - soft * g.sum(axis=axis, keepdims=True))

    out._backward = bw
    return out


def tsum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    if axis is not None:
        axis = _axis_check("sum", x, axis)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), (x,), "sum")

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.data.shape))

    out._backward = bw
    return out


def tmean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    if axis is not None:
        axis = _axis_check("mean", x, axis)
    count = x.data.size if axis is None else x.data.shape[axis]
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims), (x,), "mean")

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.data.shape) / count)

    out._backward = bw
    return out


def sq_l2_norm(x: Tensor) -> Tensor:
    """Sum of squared entries, reduced to a scalar."""
    x = _wrap(x)
    out = Tensor(np.sum(x.data * x.data), (x,), "sq_l2_norm")

    def bw(g):
        _accumulate(x, 2.0 * g * x.data)

    out._backward = bw
    return out


def l1_norm(x: Tensor) -> Tensor:
    """Sum of absolute entries, reduced to a scalar."""
    x = _wrap(x)
    out = Tensor(np.sum(np.abs(x.data)), (x,), "l1_norm")

    def bw(g):
        _accumulate(x, g * np.sign(x.data))

    out._backward = bw
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    parts = [_wrap(t) for t in tensors]
    if not parts:
        raise ContractError("concat: needs at least one tensor")
    axis = _axis_check("concat", parts[0], axis)
    ref = parts[0].shape
    for t in parts[1:]:
        if t.ndim != parts[0].ndim or any(
            i != axis and t.shape[i] != ref[i] for i in range(t.ndim)
        ):
            raise DimensionError(
                f"concat: shape {t.shape} incompatible with {ref} along axis {axis}"
            )
    out = Tensor(np.concatenate([t.data for t in parts], axis=axis), tuple(parts), "concat")
    sizes = [t.shape[axis] for t in parts]

    def bw(g):
        offset = 0
        for t, n in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + n)
            _accumulate(t, g[tuple(sl)])
            offset += n

    out._backward = bw
    return out


def take_rows(x: Tensor, indices) -> Tensor:
    """Select rows of a 2-d tensor; repeated indices accumulate gradient."""
    x = _wrap(x)
    if x.ndim != 2:
        raise DimensionError(f"take_rows: expects a 2-d tensor, got shape {x.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionError(f"take_rows: indices must be a vector, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ContractError(f"take_rows: index out of range for {x.shape[0]} rows")
    out = Tensor(x.data[idx], (x,), "take_rows")

    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        _accumulate(x, full)

    out._backward = bw
    return out


def transpose(x: Tensor) -> Tensor:
    x = _wrap(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose: expects a 2-d tensor, got shape {x.shape}")
    out = Tensor(x.data.T, (x,), "transpose")

    def bw(g):
        _accumulate(x, g.T)

    out._backward = bw
    return out


def reshape(x: Tensor, shape) -> Tensor:
    x = _wrap(x)
    try:
        val = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view shape {x.shape} as {shape}") from None
    out = Tensor(val, (x,), "reshape")

    def bw(g):
        _accumulate(x, g.reshape(x.data.shape))

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# dispatch, backward, gradient checking

_KINDS = {
    "matmul": matmul,
    "add": add,
    "subtract": subtract,
    "multiply": multiply,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "absolute": absolute,
    "clip": clip,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "mean": tmean,
    "sum": tsum,
    "sq_l2_norm": sq_l2_norm,
    "l1_norm": l1_norm,
    "concat": lambda *ts, axis=0: concat(ts, axis=axis),
    "take_rows": take_rows,
    "transpose": transpose,
    "reshape": reshape,
}

_ALIASES = {
    "elementwise-multiply": "multiply",
    "squared-L2-norm": "sq_l2_norm",
    "L1-norm": "l1_norm",
}


def apply(kind: str, *inputs, **kwargs) -> Tensor:
    """Dispatch an operation by kind name.

    Raises ContractError for unknown kinds; shape problems surface as
    DimensionError naming the operation.
    """
    key = _ALIASES.get(kind, kind)
    fn = _KINDS.get(key)
    if fn is None:
        raise ContractError(f"apply: unknown op kind {kind!r}")
    return fn(*inputs, **kwargs)


def _topo_order(root: Tensor):
    order = []
    seen = {id(root)}
    stack = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        pushed = False
        for p in parents:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                pushed = True
                break
        if not pushed:
            order.append(node)
            stack.pop()
    return order


def backward(loss: Tensor) -> None:
    """Populate `grad` on every tensor reachable from a scalar loss.

    Gradients sum over all paths; the seed at `loss` is one. Each graph
    node is visited exactly once.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward: loss must be a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    order = _topo_order(loss)
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def grad_check(f, point, eps: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps a Tensor to a scalar Tensor and must be deterministic and
    smooth within +-eps of `point` (kinks such as relu at zero are
    excluded by precondition). Non-finite values make the result +inf.

    Per coordinate the error is |analytic - numeric| divided by
    max(1e-12, |analytic| + |numeric|); the max over coordinates is
    returned.
    """
    base = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(base.copy())
    out = f(x)
    backward(out)
    analytic = np.zeros_like(base) if x.grad is None else x.grad

    worst = 0.0
    flat = base.reshape(-1)
    for i in range(flat.size):
        shifted = flat.copy()
        shifted[i] = flat[i] + eps
        hi = f(Tensor(shifted.reshape(base.shape))).item()
        shifted[i] = flat[i] - eps
        lo = f(Tensor(shifted.reshape(base.shape))).item()
        if not (np.isfinite(hi) and np.isfinite(lo)):
            return float("inf")
        numeric = (hi - lo) / (2.0 * eps)
        a = analytic.reshape(-1)[i]
        if not np.isfinite(a):
            return float("inf")
        err = abs(a - numeric) / max(1e-12, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst
