"""Reverse-mode automatic differentiation over float64 numpy arrays.

Operations on :class:`Tensor` objects are recorded on the active :class:`Tape`
whenever at least one operand requires a gradient.  Creation order on the tape
is a topological order, so the backward sweep simply walks the node list in
reverse.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_local = threading.local()


class TapeError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


def _stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> "Tape | None":
    stack = _stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of differentiable primitives.

    Tapes are single-writer: use one per thread.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}
        self.output: Tensor | None = None

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def watch(self, name: str, leaf: "Tensor") -> "Tensor":
        if name in self.params and self.params[name] is not leaf:
            raise TapeError(f"parameter {name!r} watched twice")
        leaf.requires_grad = True
        leaf.name = name
        self.params[name] = leaf
        return leaf

    @property
    def head(self) -> "Tensor":
        if self.output is not None:
            return self.output
        if not self.nodes:
            raise TapeError("empty tape")
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.nodes)


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "vjp", "name", "op")
    __array_ufunc__ = None  # make ndarray (op) Tensor defer to the Tensor operators

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.parents: tuple = ()
        self.vjp: Callable | None = None
        self.name = name
        self.op = "leaf"

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def data_of(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=DTYPE)


def detach(x) -> Tensor:
    return Tensor(data_of(x))


def _needs(x) -> bool:
    return isinstance(x, Tensor) and x.requires_grad


def _node(data, parents: tuple, vjp: Callable, op: str) -> Tensor:
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(_needs(p) for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.vjp = vjp
        out.op = op
        tape.nodes.append(out)
    return out


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise binary ------------------------------------------------

def add(a, b) -> Tensor:
    ad, bd = data_of(a), data_of(b)
    return _node(ad + bd, (a, b),
                 lambda g: (unbroadcast(g, ad.shape), unbroadcast(g, bd.shape)), "add")


def sub(a, b) -> Tensor:
    ad, bd = data_of(a), data_of(b)
    return _node(ad - bd, (a, b),
                 lambda g: (unbroadcast(g, ad.shape), unbroadcast(-g, bd.shape)), "sub")


def mul(a, b) -> Tensor:
    ad, bd = data_of(a), data_of(b)

    def vjp(g):
        ga = unbroadcast(g * bd, ad.shape) if _needs(a) else None
        gb = unbroadcast(g * ad, bd.shape) if _needs(b) else None
        return ga, gb

    return _node(ad * bd, (a, b), vjp, "mul")


def div(a, b) -> Tensor:
    ad, bd = data_of(a), data_of(b)
    out = ad / bd

    def vjp(g):
        ga = unbroadcast(g / bd, ad.shape) if _needs(a) else None
        gb = unbroadcast(-g * out / bd, bd.shape) if _needs(b) else None
        return ga, gb

    return _node(out, (a, b), vjp, "div")


def neg(a) -> Tensor:
    return _node(-data_of(a), (a,), lambda g: (-g,), "neg")


def power(a, p: float) -> Tensor:
    ad = data_of(a)
    p = float(p)
    return _node(ad ** p, (a,), lambda g: (g * p * ad ** (p - 1.0),), "pow")


def square(a) -> Tensor:
    ad = data_of(a)
    return _node(ad * ad, (a,), lambda g: (2.0 * g * ad,), "square")


# -- elementwise unary -------------------------------------------------

def exp(a) -> Tensor:
    out = np.exp(data_of(a))
    return _node(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    ad = data_of(a)
    return _node(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sqrt(a) -> Tensor:
    out = np.sqrt(data_of(a))
    return _node(out, (a,), lambda g: (0.5 * g / out,), "sqrt")


def tanh(a) -> Tensor:
    out = np.tanh(data_of(a))
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    out = _sigmoid(data_of(a))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def sin(a) -> Tensor:
    ad = data_of(a)
    return _node(np.sin(ad), (a,), lambda g: (g * np.cos(ad),), "sin")


def cos(a) -> Tensor:
    ad = data_of(a)
    return _node(np.cos(ad), (a,), lambda g: (-g * np.sin(ad),), "cos")


# -- linear algebra / reductions ---------------------------------------

def matmul(a, b) -> Tensor:
    ad, bd = data_of(a), data_of(b)
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {ad.shape} @ {bd.shape}")
    if bd.ndim == 2:
        # fold leading axes into one GEMM
        flat = ad.reshape(-1, ad.shape[-1])
        out = (flat @ bd).reshape(ad.shape[:-1] + (bd.shape[1],))

        def vjp(g):
            g2 = g.reshape(-1, g.shape[-1])
            ga = (g2 @ bd.T).reshape(ad.shape) if _needs(a) else None
            gb = flat.T @ g2 if _needs(b) else None
            return ga, gb

        return _node(out, (a, b), vjp, "matmul")

    out = np.matmul(ad, bd)

    def vjp(g):
        ga = unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape) if _needs(a) else None
        gb = unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape) if _needs(b) else None
        return ga, gb

    return _node(out, (a, b), vjp, "matmul")


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    ad = data_of(a)
    out = ad.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, ad.shape).copy(),)

    return _node(out, (a,), vjp, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    ad = data_of(a)
    n = ad.size if axis is None else np.prod([ad.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / float(n))


def softmax(a, axis: int = -1) -> Tensor:
    ad = data_of(a)
    z = np.exp(ad - ad.max(axis=axis, keepdims=True))
    out = z / z.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _node(out, (a,), vjp, "softmax")


# -- shape ops ---------------------------------------------------------

def reshape(a, shape) -> Tensor:
    ad = data_of(a)
    return _node(ad.reshape(shape), (a,), lambda g: (g.reshape(ad.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    ad = data_of(a)
    out = np.transpose(ad, axes)
    inv = None if axes is None else np.argsort(axes)
    return _node(out, (a,), lambda g: (np.transpose(g, inv),), "transpose")


def swapaxes(a, i: int, j: int) -> Tensor:
    return _node(np.swapaxes(data_of(a), i, j), (a,),
                 lambda g: (np.swapaxes(g, i, j),), "swapaxes")


def expand_dims(a, axis: int) -> Tensor:
    ad = data_of(a)
    return _node(np.expand_dims(ad, axis), (a,), lambda g: (g.reshape(ad.shape),), "expand_dims")


def broadcast_to(a, shape) -> Tensor:
    ad = data_of(a)
    return _node(np.broadcast_to(ad, shape), (a,),
                 lambda g: (unbroadcast(g, ad.shape),), "broadcast_to")


def _basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, slice, type(Ellipsis))) or i is None for i in items)


def getitem(a, idx) -> Tensor:
    ad = data_of(a)
    basic = _basic_index(idx)

    def vjp(g):
        full = np.zeros_like(ad)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _node(ad[idx], (a,), vjp, "getitem")


def concatenate(items: Sequence, axis: int = 0) -> Tensor:
    datas = [data_of(x) for x in items]
    sizes = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _node(np.concatenate(datas, axis=axis), tuple(items), vjp, "concatenate")


def stack(items: Sequence, axis: int = 0) -> Tensor:
    datas = [data_of(x) for x in items]

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(datas)))

    return _node(np.stack(datas, axis=axis), tuple(items), vjp, "stack")


# -- driving the tape --------------------------------------------------

def backward(tape: Tape, output: Tensor | None = None, seed: float = 1.0) -> dict[str, np.ndarray]:
    """Adjoints of a scalar tape head with respect to every watched parameter.

    Parameters that never influenced ``output`` receive exact zeros.
    """
    out = tape.head if output is None else output
    if out.data.size != 1:
        raise TapeError(f"backward needs a scalar head, got shape {out.shape}")
    adj: dict[int, np.ndarray] = {}
    if out.requires_grad:
        adj[id(out)] = np.full(out.shape, float(seed))
    for node in reversed(tape.nodes):
        g = adj.pop(id(node), None)
        if g is None:
            continue
        for parent, gp in zip(node.parents, node.vjp(g)):
            if gp is None or not _needs(parent):
                continue
            key = id(parent)
            prev = adj.get(key)
            adj[key] = gp if prev is None else prev + gp
    grads = {}
    for name, leaf in tape.params.items():
        g = adj.get(id(leaf))
        grads[name] = np.zeros(leaf.shape) if g is None else np.asarray(g).reshape(leaf.shape)
    return grads


def leaves(params: Iterable[tuple[str, np.ndarray]], tape: Tape | None = None) -> dict[str, Tensor]:
    """Fresh leaf tensors for named arrays, watched by ``tape`` when given."""
    out = {}
    for name, value in params:
        t = Tensor(value, requires_grad=tape is not None, name=name)
        if tape is not None:
            tape.watch(name, t)
        out[name] = t
    return out
