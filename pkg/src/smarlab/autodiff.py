"""Reverse-mode automatic differentiation over dense 2-D float64 tensors.

Everything is a matrix. A Tensor wraps a numpy array of shape (rows, cols);
operations record their parents and a vector-Jacobian-product closure on the
output, so creation order is a topological order of the graph by
construction. backward() walks that order in reverse from a 1x1 loss,
seeding with 1.0 and summing gradients into .grad of every tensor that
requires them.

Rules of the road:

* float64 only, two dimensions only (scalars are 1x1, row vectors 1xE).
* Gradients accumulate additively across backward calls; call zero_grad()
  between optimizer steps.
* Calling backward twice on the same loss tensor raises GraphStateError.
* Broadcasting is deliberately minimal: add() accepts a 1xC row bias
  against an NxC matrix, everything else wants exact shapes. Tile
  explicitly (matmul with a constant ones row) when you need more.
* Parameter updates must rebind .values, never mutate in place; recorded
  closures keep references to the forward arrays.

Graphs are independent of each other: distinct losses built from distinct
forward passes can be back-propagated from different threads, but a single
graph is not thread-safe.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from smarlab.errors import GraphStateError, InputError, NumericError, ShapeError

_NODE_IDS = itertools.count()


class Tensor:
    """A 2-D float64 value plus the bookkeeping reverse mode needs."""

    __slots__ = ("values", "grad", "requires_grad", "node_id", "_parents", "_vjp", "_backward_ran")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got array of shape {arr.shape}")
        self.values = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node_id = next(_NODE_IDS)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._backward_ran = False

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.values.shape}")
        return float(self.values[0, 0])

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    # Arithmetic sugar; the module-level functions are the actual ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return smul(self, float(other))

    def __rmul__(self, other):
        return smul(self, float(other))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return smul(self, 1.0 / float(other))

    def __neg__(self):
        return smul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self) -> "Tensor":
        return relu(self)

    def log(self) -> "Tensor":
        return log(self)

    def exp(self) -> "Tensor":
        return exp(self)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def __repr__(self):
        tag = "param" if self.requires_grad and self._vjp is None else ("op" if self._vjp else "const")
        return f"Tensor({tag}, shape={self.values.shape})"


def constant(values) -> Tensor:
    return Tensor(values)


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def zeros(rows: int, cols: int, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=requires_grad)


def ones(rows: int, cols: int) -> Tensor:
    return Tensor(np.ones((rows, cols)))


def _result(values: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b; b may be a 1xC row bias against an NxC matrix."""
    a, b = _coerce(a), _coerce(b)
    if a.shape == b.shape:
        return _result(a.values + b.values, (a, b), lambda g: (g, g))
    if b.rows == 1 and b.cols == a.cols:
        return _result(
            a.values + b.values,
            (a, b),
            lambda g: (g, g.sum(axis=0, keepdims=True)),
        )
    raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    return _result(a.values - b.values, (a, b), lambda g: (g, -g))


def smul(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    return _result(a.values * c, (a,), lambda g: (g * c,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product, exact shape match."""
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    return _result(a.values * b.values, (a, b), lambda g: (g * b.values, g * a.values))


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient, exact shape match; b must be nonzero everywhere."""
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"div: incompatible shapes {a.shape} and {b.shape}")
    if np.any(b.values == 0.0):
        raise NumericError("div: zero entry in denominator")
    out = a.values / b.values
    return _result(out, (a, b), lambda g: (g / b.values, -g * out / b.values))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    return _result(
        a.values @ b.values,
        (a, b),
        lambda g: (g @ b.values.T, a.values.T @ g),
    )


def row_softmax(x: Tensor) -> Tensor:
    """Numerically stable softmax over each row; rows sum to 1."""
    x = _coerce(x)
    if not np.isfinite(x.values).all():
        raise NumericError("row_softmax: non-finite input")
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        inner = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - inner),)

    return _result(s, (x,), vjp)


def row_sum(x: Tensor) -> Tensor:
    """NxC -> Nx1 sum over each row."""
    x = _coerce(x)
    cols = x.cols
    return _result(
        x.values.sum(axis=1, keepdims=True),
        (x,),
        lambda g: (np.repeat(g, cols, axis=1),),
    )


def col_mean(x: Tensor) -> Tensor:
    """NxC -> 1xC mean over each column."""
    x = _coerce(x)
    n = x.rows
    return _result(
        x.values.mean(axis=0, keepdims=True),
        (x,),
        lambda g: (np.repeat(g / n, n, axis=0),),
    )


def sum_all(x: Tensor) -> Tensor:
    """NxC -> 1x1 sum of all entries."""
    x = _coerce(x)
    shape = x.shape
    return _result(
        np.array([[x.values.sum()]]),
        (x,),
        lambda g: (np.full(shape, g[0, 0]),),
    )


def log(x: Tensor) -> Tensor:
    x = _coerce(x)
    if np.any(x.values <= 0.0):
        raise NumericError("log: non-positive entry")
    return _result(np.log(x.values), (x,), lambda g: (g / x.values,))


def exp(x: Tensor) -> Tensor:
    x = _coerce(x)
    out = np.exp(x.values)
    return _result(out, (x,), lambda g: (g * out,))


def relu(x: Tensor) -> Tensor:
    x = _coerce(x)
    keep = x.values > 0.0
    return _result(x.values * keep, (x,), lambda g: (g * keep,))


def gather_rows(x: Tensor, index) -> Tensor:
    """Select rows by integer index; repeats allowed, backward scatter-adds."""
    x = _coerce(x)
    idx = np.asarray(index, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= x.rows):
        raise InputError(f"gather_rows: index out of range for {x.rows} rows")
    shape = x.shape

    def vjp(g):
        acc = np.zeros(shape)
        np.add.at(acc, idx, g)
        return (acc,)

    return _result(x.values[idx], (x,), vjp)


def scatter_rows(x: Tensor, index, n_rows: int) -> Tensor:
    """Place the rows of x at the given (distinct) positions of an otherwise
    zero (n_rows x C) matrix. Inverse of gather_rows for unique indices."""
    x = _coerce(x)
    idx = np.asarray(index, dtype=np.int64).ravel()
    if idx.size != x.rows:
        raise ShapeError(f"scatter_rows: {idx.size} indices for {x.rows} rows")
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        raise InputError(f"scatter_rows: index out of range for {n_rows} rows")
    if np.unique(idx).size != idx.size:
        raise InputError("scatter_rows: duplicate target rows")
    out = np.zeros((n_rows, x.cols))
    out[idx] = x.values
    return _result(out, (x,), lambda g: (g[idx],))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack tensors vertically; backward slices the gradient back apart."""
    parts = [_coerce(p) for p in parts]
    if not parts:
        raise InputError("concat_rows: nothing to concatenate")
    cols = parts[0].cols
    if any(p.cols != cols for p in parts):
        raise ShapeError("concat_rows: column counts differ")
    offsets = np.cumsum([0] + [p.rows for p in parts])

    def vjp(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _result(np.vstack([p.values for p in parts]), tuple(parts), vjp)


def detach(x: Tensor) -> Tensor:
    """Copy of x cut out of the graph (stop-gradient)."""
    return _coerce(x).detach()


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into t.grad for every tensor that requires
    gradients and is reachable from the 1x1 loss."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward: loss must be 1x1, got {loss.shape}")
    if loss._backward_ran:
        raise GraphStateError("backward: already ran for this loss; rebuild the graph")
    loss._backward_ran = True
    if not loss.requires_grad:
        return

    # Reachable closure over tensors that require gradients. Creation order
    # (node_id) is a topological order, so sorting replaces an explicit
    # dependency sort.
    nodes: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in nodes:
            continue
        nodes[id(t)] = t
        stack.extend(p for p in t._parents if p.requires_grad and id(p) not in nodes)

    pending: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for t in sorted(nodes.values(), key=lambda n: n.node_id, reverse=True):
        g = pending.pop(id(t), None)
        if g is None:
            continue
        t.grad = g if t.grad is None else t.grad + g
        if t._vjp is None:
            continue
        for parent, pg in zip(t._parents, t._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            held = pending.get(id(parent))
            pending[id(parent)] = pg if held is None else held + pg


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None
