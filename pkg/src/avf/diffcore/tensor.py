"""Reverse-mode automatic differentiation over dense float64 arrays.

Every differentiable quantity in the library is carried by :class:`Tensor`,
a thin wrapper around a ``numpy`` array that records the operations applied
to it.  Calling :func:`backward` on a scalar result walks the recorded graph
in reverse topological order and accumulates ``d(result)/d(leaf)`` into the
``grad`` field of every tensor created with ``requires_grad=True``.

Design notes
------------
* Dense float64 only.  Reproducibility is preferred over speed; the hot
  rendering loops live in dedicated kernels that plug in through
  :func:`custom_op`.
* The graph is rebuilt on every forward pass (references from outputs to
  parents), so "resetting the tape" simply means dropping the output and
  zeroing leaf gradients.  Calling :func:`backward` twice without zeroing
  accumulates, matching the usual optimizer contract.
* Forward evaluation never mutates inputs; evaluating a graph of shared,
  immutable weight tensors from several threads is safe.  Backward mutates
  ``grad`` fields and must stay confined to one optimization context.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "DiffcoreError",
    "GradientNanError",
    "as_tensor",
    "backward",
    "custom_op",
    "concatenate",
    "stack",
    "where",
    "maximum",
    "minimum",
]


class DiffcoreError(RuntimeError):
    """Contract violation inside the autodiff layer."""


class GradientNanError(DiffcoreError):
    """A NaN appeared while accumulating gradients; message carries the op trace."""


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` by summing broadcast dimensions."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray, child_op: str) -> None:
        if np.isnan(g).any():
            raise GradientNanError(f"NaN gradient flowing out of op '{child_op}'")
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return mul(power(self, -1.0), other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    # -- reductions / shaping -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or not isinstance(shape[0], (tuple, list)) else shape[0])

    def transpose(self, axes=None):
        return transpose(self, axes)

    def backward(self) -> None:
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def custom_op(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
    op: str,
) -> Tensor:
    """Create a graph node from a hand-written forward/backward pair.

    ``backward_fn`` receives the upstream gradient and must return one
    gradient array (or None) per parent, each matching the parent's shape.
    """
    out = Tensor(data)
    parents = tuple(parents)
    if any(p.requires_grad or p._backward_fn is not None for p in parents):
        out.requires_grad = True
        out._parents = parents
        out.op = op

        def _bw(g: np.ndarray) -> None:
            grads = backward_fn(g)
            for p, pg in zip(parents, grads):
                if pg is not None:
                    p._accumulate(np.asarray(pg, dtype=np.float64), op)

        out._backward_fn = _bw
    return out


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every reachable leaf's ``grad``.

    ``root`` must be scalar.  Repeated calls without zeroing accumulate.
    """
    if root.size != 1:
        raise DiffcoreError(f"backward() needs a scalar root, got shape {root.shape}")
    if np.isnan(root.data).any():
        raise GradientNanError(f"NaN in forward value at op '{root.op}'")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    root._accumulate(np.ones_like(root.data), "backward-seed")
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


# -- primitive ops ------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return custom_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return custom_op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    e = float(exponent)
    out = a.data**e
    return custom_op(out, (a,), lambda g: (g * e * a.data ** (e - 1.0),), f"pow{e}")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.ndim == 1 and b.ndim == 1:
            return g * b.data, g * a.data
        if a.ndim == 1:
            ga = _unbroadcast((g[..., None, :] * b.data).sum(-1), a.shape)
            gb = _unbroadcast(a.data[:, None] * g[..., None, :], b.shape)
            return ga, gb
        if b.ndim == 1:
            ga = _unbroadcast(g[..., None] * b.data, a.shape)
            gb = (g[..., None] * a.data).reshape(-1, a.shape[-1]).sum(0)
            return ga, gb
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return custom_op(a.data @ b.data, (a, b), bw, "matmul")


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return custom_op(out, (a,), bw, "sum")


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else (np.prod([a.shape[ax] for ax in np.atleast_1d(axis)]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return custom_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    inv = None if axes is None else np.argsort(axes)
    return custom_op(
        a.data.transpose(axes),
        (a,),
        lambda g: (g.transpose(inv),),
        "transpose",
    )


def take(a, key) -> Tensor:
    """Indexing/gather.  Integer-array keys scatter-add on backward."""
    a = as_tensor(a)
    keys = key if isinstance(key, tuple) else (key,)
    fancy = any(isinstance(k, (np.ndarray, list)) for k in keys)

    def bw(g):
        full = np.zeros_like(a.data)
        if fancy:
            np.add.at(full, key, g)
        else:
            full[key] += g
        return (full,)

    return custom_op(a.data[key], (a,), bw, "take")


def concatenate(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return custom_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(tensors)))

    return custom_op(np.stack([t.data for t in tensors], axis=axis), tensors, bw, "stack")


def where(cond, a, b) -> Tensor:
    """Select by a constant mask; gradients route to the taken branch."""
    cond = np.asarray(cond, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)
    return custom_op(
        np.where(cond, a.data, b.data),
        (a, b),
        lambda g: (
            _unbroadcast(np.where(cond, g, 0.0), a.shape),
            _unbroadcast(np.where(cond, 0.0, g), b.shape),
        ),
        "where",
    )


def maximum(a, other: float) -> Tensor:
    a = as_tensor(a)
    mask = a.data > other
    return custom_op(np.maximum(a.data, other), (a,), lambda g: (g * mask,), "maximum")


def minimum(a, other: float) -> Tensor:
    a = as_tensor(a)
    mask = a.data < other
    return custom_op(np.minimum(a.data, other), (a,), lambda g: (g * mask,), "minimum")


# -- elementwise nonlinearities -----------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return custom_op(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return custom_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return custom_op(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return custom_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def sin(a) -> Tensor:
    a = as_tensor(a)
    return custom_op(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),), "sin")


def cos(a) -> Tensor:
    a = as_tensor(a)
    return custom_op(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),), "cos")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return custom_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return custom_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a) -> Tensor:
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return custom_op(out, (a,), lambda g: (g * sig,), "softplus")


def relu(a) -> Tensor:
    return maximum(a, 0.0)
