"""Minimal reverse-mode autodiff over a recorded computation graph.

Everything is float64 numpy. The op set is deliberately small: dense layers,
elementwise nonlinearities, reductions, and the handful of pointwise ops the
contrastive losses need. No general broadcasting beyond what those ops use.
"""

from __future__ import annotations

import numpy as np


class AutodiffError(RuntimeError):
    pass


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    if grad.shape == shape:
        return grad
    # leading axes added by broadcasting
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Node in the recorded graph. Leaf tensors own their grad buffers."""

    __slots__ = ("values", "grad", "parents", "_backward", "op")

    def __init__(self, values, parents=(), backward=None, op="leaf"):
        self.values = _as_array(values)
        self.grad = np.zeros_like(self.values)
        self.parents = tuple(parents)
        self._backward = backward
        self.op = op

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    # -- graph construction -------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.values + other.values, (self, other), op="add")

        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))

        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.values, (self,), op="neg")
        out._backward = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.values * other.values, (self, other), op="mul")

        def backward(g):
            return (
                _unbroadcast(g * other.values, self.shape),
                _unbroadcast(g * self.values, other.shape),
            )

        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        out = Tensor(self.values / other.values, (self, other), op="div")

        def backward(g):
            return (
                _unbroadcast(g / other.values, self.shape),
                _unbroadcast(-g * self.values / other.values**2, other.shape),
            )

        out._backward = backward
        return out

    def matmul(self, other):
        other = _wrap(other)
        a, b = self.values, other.values
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise AutodiffError(
                f"matmul shape mismatch: {a.shape} @ {b.shape}"
            )
        out = Tensor(a @ b, (self, other), op="matmul")
        out._backward = lambda g: (g @ b.T, a.T @ g)
        return out

    __matmul__ = matmul

    def transpose(self):
        out = Tensor(self.values.T, (self,), op="transpose")
        out._backward = lambda g: (g.T,)
        return out

    @property
    def T(self):
        return self.transpose()

    def exp(self):
        ev = np.exp(self.values)
        out = Tensor(ev, (self,), op="exp")
        out._backward = lambda g: (g * ev,)
        return out

    def log(self):
        out = Tensor(np.log(self.values), (self,), op="log")
        out._backward = lambda g: (g / self.values,)
        return out

    def sqrt(self):
        sv = np.sqrt(self.values)
        out = Tensor(sv, (self,), op="sqrt")
        out._backward = lambda g: (g / (2.0 * sv),)
        return out

    def clamp_min(self, floor: float):
        mask = self.values >= floor
        out = Tensor(np.maximum(self.values, floor), (self,), op="clamp_min")
        out._backward = lambda g: (g * mask,)
        return out

    def relu(self):
        mask = self.values > 0
        out = Tensor(np.where(mask, self.values, 0.0), (self,), op="relu")
        out._backward = lambda g: (g * mask,)
        return out

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.values.sum(axis=axis, keepdims=keepdims), (self,), op="sum")

        def backward(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        out._backward = backward
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.values.size if axis is None else self.values.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis: int):
        """Max-reduce one axis; ties route gradient to the first maximum."""
        idx = np.argmax(self.values, axis=axis)
        out_vals = np.take_along_axis(
            self.values, np.expand_dims(idx, axis), axis=axis
        ).squeeze(axis)
        out = Tensor(out_vals, (self,), op="max")

        def backward(g):
            full = np.zeros(self.shape)
            np.put_along_axis(
                full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis
            )
            return (full,)

        out._backward = backward
        return out

    def reshape(self, *shape):
        out = Tensor(self.values.reshape(*shape), (self,), op="reshape")
        out._backward = lambda g: (g.reshape(self.shape),)
        return out

    def pick(self, rows: np.ndarray, cols: np.ndarray):
        """Gather values[rows[k], cols[k]] into a 1-D tensor."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        out = Tensor(self.values[rows, cols], (self, ), op="pick")

        def backward(g):
            full = np.zeros(self.shape)
            np.add.at(full, (rows, cols), g)
            return (full,)

        out._backward = backward
        return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """Graph leaf carrying non-trainable data (inputs, stop-gradient weights)."""
    return Tensor(x)


class Parameter(Tensor):
    """Named trainable leaf."""

    __slots__ = ("name",)

    def __init__(self, values, name: str):
        super().__init__(values)
        self.name = name


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order


def backward(loss: Tensor):
    """Backpropagate from a scalar loss, accumulating into leaf grads."""
    if loss.values.size != 1:
        raise AutodiffError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.values):
        raise AutodiffError("backward called on a non-finite loss")
    order = _topo_order(loss)
    # intermediate grads live in a side table so leaves keep their buffers
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise AutodiffError(f"non-finite gradient at op '{node.op}'")
        if node._backward is None:
            node.grad += g.reshape(node.grad.shape)
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)


# -- composite ops ---------------------------------------------------------


def dense_forward(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    if x.shape[-1] != w.shape[0]:
        raise AutodiffError(
            f"dense shape mismatch: input {x.shape} vs weight {w.shape}"
        )
    return x.matmul(w) + b


def softmax_rows(x: Tensor) -> Tensor:
    # shifting by the (constant) row max leaves the gradient unchanged
    shift = constant(x.values.max(axis=1, keepdims=True))
    e = (x - shift).exp()
    return e / e.sum(axis=1, keepdims=True)


def l2_normalize_rows(x: Tensor) -> Tensor:
    sq = (x * x).sum(axis=1, keepdims=True)
    zero_rows = np.flatnonzero(sq.values.ravel() == 0.0)
    if zero_rows.size:
        raise AutodiffError(f"cannot l2-normalize all-zero row {zero_rows[0]}")
    return x / sq.sqrt()


def max_pool_points(x: Tensor) -> Tensor:
    """(batch, points, features) -> (batch, features) feature-wise max."""
    if len(x.shape) != 3:
        raise AutodiffError(f"max_pool_points expects 3-D input, got {x.shape}")
    return x.max(axis=1)
