"""Univariate second-order jets for input-coordinate derivatives.

A :class:`Jet` propagates a value together with first and second derivatives
along ``D`` coordinate directions.  Internally the slots are stacked on a
leading axis of one tensor::

    data[0]            value
    data[1:1+D]        first derivatives, one per direction
    data[1+D:1+2D]     second derivatives (order 2 only)

so any map that is linear in its jet argument (``x @ W``, sums, indexing)
acts on every slot with a single primitive.  Pointwise nonlinearities are
fused primitives whose vector-Jacobian product is written out with the first
three derivatives of the scalar function.  Everything is recorded on the
active tape, so losses built from derivative slots can be differentiated with
respect to parameters.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor, _node, _needs, data_of, unbroadcast


class Jet:
    __slots__ = ("data", "n_dirs", "order")

    def __init__(self, value=None, d1=None, d2=None, order: int = 2, *, data: Tensor | None = None,
                 n_dirs: int | None = None):
        self.order = order
        if data is not None:
            self.data = data
            self.n_dirs = int(n_dirs)
            return
        value = T.as_tensor(value)
        if d1 is None:
            self.n_dirs = 0
            self.data = T.expand_dims(value, 0)
            return
        d1 = T.as_tensor(d1)
        self.n_dirs = d1.shape[0]
        parts = [T.expand_dims(value, 0), d1]
        if order >= 2:
            parts.append(T.as_tensor(d2) if d2 is not None else Tensor(np.zeros(d1.shape)))
        self.data = T.concatenate(parts, axis=0)

    @property
    def n_slots(self) -> int:
        return 1 + (self.n_dirs * (2 if self.order >= 2 else 1))

    @property
    def shape(self) -> tuple:
        return self.data.shape[1:]

    @property
    def ndim(self) -> int:
        return self.data.ndim - 1

    @property
    def value(self) -> Tensor:
        return self.data[0]

    @property
    def d1(self) -> Tensor | None:
        if not self.n_dirs:
            return None
        return self.data[1:1 + self.n_dirs]

    @property
    def d2(self) -> Tensor | None:
        if not self.n_dirs or self.order < 2:
            return None
        return self.data[1 + self.n_dirs:]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, dirs={self.n_dirs}, order={self.order})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return add(self, neg(o))

    def __rsub__(self, o):
        return add(o, neg(self))

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, w):
        return matmul(self, w)

    def __getitem__(self, idx):
        return take_last(self, idx)


def _wrap(data: Tensor, like: "Jet") -> Jet:
    return Jet(data=data, n_dirs=like.n_dirs, order=like.order)


def lift(x, order: int = 2) -> Jet:
    return x if isinstance(x, Jet) else Jet(x, order=order)


def constant_part(x) -> Tensor:
    return x.value if isinstance(x, Jet) else T.as_tensor(x)


def seed(points, directions: Sequence[int], order: int = 2) -> Jet:
    """Jet for coordinates ``points`` (..., d) seeded along ``directions``."""
    pts = np.asarray(data_of(points), dtype=np.float64)
    d = pts.shape[-1]
    for k in directions:
        if not 0 <= k < d:
            raise IndexError(f"direction {k} out of range for coordinate dimension {d}")
    n = len(directions)
    slots = 1 + n * (2 if order >= 2 else 1)
    data = np.zeros((slots,) + pts.shape)
    data[0] = pts
    for i, k in enumerate(directions):
        data[1 + i, ..., k] = 1.0
    return Jet(data=Tensor(data), n_dirs=n, order=order)


def _align_data(x: Jet, ndim: int) -> Tensor:
    missing = ndim - x.ndim
    if missing <= 0:
        return x.data
    shape = (x.data.shape[0],) + (1,) * missing + x.shape
    return T.reshape(x.data, shape)


def _add_slot0(a: Tensor, c) -> Tensor:
    """``a`` with ``c`` added to slot 0 only."""
    ad, cd = a.data, data_of(c)
    if cd.ndim >= ad.ndim:
        raise ValueError(f"constant of shape {cd.shape} has more axes than jet slots {ad.shape[1:]}")
    out = ad.copy()
    out[0] += cd

    def vjp(g):
        gc = unbroadcast(g[0], cd.shape) if _needs(c) else None
        return g, gc

    return _node(out, (a, c), vjp, "add_slot0")


# -- linear rules ------------------------------------------------------

def _compatible(a: Jet, b: Jet) -> bool:
    return a.n_dirs == b.n_dirs and a.order == b.order


def add(a, b) -> Jet:
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return Jet(T.add(a, b))
    if not isinstance(a, Jet):
        a, b = b, a
    if isinstance(b, Jet) and b.n_dirs == 0 and a.n_dirs > 0:
        b = b.value
    if isinstance(b, Jet) and a.n_dirs == 0 and b.n_dirs > 0:
        a, b = b, a.value
    if not isinstance(b, Jet):
        return _wrap(_add_slot0(a.data, b), a)
    if not _compatible(a, b):
        raise ValueError(f"incompatible jets {a} + {b}")
    nd = max(a.ndim, b.ndim)
    return _wrap(T.add(_align_data(a, nd), _align_data(b, nd)), a)


def neg(a) -> Jet:
    if not isinstance(a, Jet):
        return Jet(T.neg(a))
    return _wrap(T.neg(a.data), a)


def matmul(a: Jet, w) -> Jet:
    """``a @ w`` with ``w`` independent of the seeded coordinates."""
    a = lift(a)
    wd = data_of(w)
    if wd.ndim > 2 and wd.ndim > a.ndim:
        raise ValueError("batched right operand may not have more axes than the jet")
    return _wrap(T.matmul(a.data, w), a)


def tsum(a: Jet, axis: int, keepdims: bool = False) -> Jet:
    if axis >= 0:
        raise ValueError("jet reductions take negative axes")
    return _wrap(T.tsum(a.data, axis, keepdims), a)


def take_last(a: Jet, idx) -> Jet:
    """Index the trailing (feature) axis."""
    return _wrap(a.data[(Ellipsis, idx)], a)


def component(a: Jet, i: int) -> Jet:
    return take_last(a, i)


def expand_last(a: Jet) -> Jet:
    return _wrap(T.expand_dims(a.data, -1), a)


def concat_last(jets: list[Jet]) -> Jet:
    if len(jets) == 1:
        return jets[0]
    return _wrap(T.concatenate([j.data for j in jets], axis=-1), jets[0])


# -- products ------------------------------------------------------------

def _slots(a: Jet):
    D = a.n_dirs
    v = a.data[0]
    d1 = a.data[1:1 + D] if D else None
    d2 = a.data[1 + D:] if D and a.order >= 2 else None
    return v, d1, d2


def _restack(like: Jet, v, d1, d2) -> Jet:
    parts = [T.expand_dims(v, 0)]
    if like.n_dirs:
        parts.append(d1)
        if like.order >= 2:
            parts.append(d2)
    if len(parts) == 1:
        return _wrap(parts[0], like)
    return _wrap(T.concatenate(parts, axis=0), like)


def mul(a, b) -> Jet:
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return Jet(T.mul(a, b))
    if not isinstance(a, Jet):
        a, b = b, a
    if isinstance(b, Jet) and b.n_dirs == 0:
        b = b.value
    if isinstance(b, Jet) and a.n_dirs == 0:
        a, b = b, a.value
    if not isinstance(b, Jet):
        nd = max(a.ndim, np.ndim(data_of(b)))
        return _wrap(T.mul(_align_data(a, nd), b), a)
    if not _compatible(a, b):
        raise ValueError(f"incompatible jets {a} * {b}")
    nd = max(a.ndim, b.ndim)
    a = _wrap(_align_data(a, nd), a)
    b = _wrap(_align_data(b, nd), b)
    av, a1, a2 = _slots(a)
    bv, b1, b2 = _slots(b)
    d2 = None
    if a.order >= 2:
        d2 = a2 * bv + b2 * av + 2.0 * (a1 * b1)
    return _restack(a, av * bv, a1 * bv + b1 * av, d2)


def square(a) -> Jet:
    return mul(a, a)


# -- fused pointwise functions -----------------------------------------------

def _tanh_derivs(v):
    y = np.tanh(v)
    d1 = 1.0 - y * y
    d2 = -2.0 * y * d1
    d3 = d1 * (4.0 * y * y - 2.0 * d1)
    return y, d1, d2, d3


def _sigmoid_derivs(v):
    s = T._sigmoid(v)
    q = s * (1.0 - s)
    r = 1.0 - 2.0 * s
    return s, q, q * r, q * r * r - 2.0 * q * q


def _swish_derivs(v):
    s = T._sigmoid(v)
    q = s * (1.0 - s)
    r = 1.0 - 2.0 * s
    y = v * s
    d1 = s + v * q
    d2 = q * (2.0 + v * r)
    d3 = q * (r * (3.0 + v * r) - 2.0 * v * q)
    return y, d1, d2, d3


def _sin_derivs(v):
    s, c = np.sin(v), np.cos(v)
    return s, c, -s, -c


def _cos_derivs(v):
    s, c = np.sin(v), np.cos(v)
    return c, -s, -c, s


def _exp_derivs(v):
    e = np.exp(v)
    return e, e, e, e


def _reciprocal_derivs(v):
    r = 1.0 / v
    r2 = r * r
    return r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2


DERIVS = {
    "tanh": _tanh_derivs,
    "sigmoid": _sigmoid_derivs,
    "swish": _swish_derivs,
    "sin": _sin_derivs,
    "cos": _cos_derivs,
    "exp": _exp_derivs,
    "reciprocal": _reciprocal_derivs,
}


def pointwise(a, kind: str) -> Jet:
    """Apply a scalar function slot-wise with second-order Taylor propagation.

    Slots: ``y = f(v)``, ``y1 = f'(v) a1``, ``y2 = f'(v) a2 + f''(v) a1^2``.
    """
    a = lift(a)
    fn = DERIVS[kind]
    x = a.data
    xd = x.data
    D = a.n_dirs
    v = xd[0]
    f0, f1, f2, f3 = fn(v)
    out = np.empty_like(xd)
    out[0] = f0
    a1 = xd[1:1 + D]
    if D:
        out[1:1 + D] = f1 * a1
        if a.order >= 2:
            a2 = xd[1 + D:]
            out[1 + D:] = f1 * a2 + f2 * (a1 * a1)

    def vjp(g):
        gx = np.empty_like(xd)
        gv = g[0] * f1
        if D:
            g1 = g[1:1 + D]
            gv = gv + f2 * (g1 * a1).sum(axis=0)
            gx[1:1 + D] = g1 * f1
            if a.order >= 2:
                g2 = g[1 + D:]
                a2 = xd[1 + D:]
                gv = gv + (g2 * (f2 * a2 + f3 * (a1 * a1))).sum(axis=0)
                gx[1:1 + D] += 2.0 * f2 * (g2 * a1)
                gx[1 + D:] = g2 * f1
        gx[0] = gv
        return (gx,)

    return _wrap(_node(out, (x,), vjp, f"jet_{kind}"), a)


def tanh(a) -> Jet:
    return pointwise(a, "tanh")


def sigmoid(a) -> Jet:
    return pointwise(a, "sigmoid")


def swish(a) -> Jet:
    """x * sigmoid(x)."""
    return pointwise(a, "swish")


def sin(a) -> Jet:
    return pointwise(a, "sin")


def cos(a) -> Jet:
    return pointwise(a, "cos")


def exp(a) -> Jet:
    return pointwise(a, "exp")


def reciprocal(a) -> Jet:
    return pointwise(a, "reciprocal")


def div(a, b) -> Jet:
    if isinstance(b, Jet):
        return mul(a, reciprocal(b))
    return mul(a, 1.0 / np.asarray(data_of(b)))


def identity(a) -> Jet:
    return lift(a)


def softmax(a) -> Jet:
    """Softmax over the trailing axis.

    With ``p = softmax(s)`` and ``c = s' - <p, s'>``:
    ``p' = p c`` and ``p'' = p (c^2 + s'' - <p, c s' + s''>)``.
    """
    a = lift(a)
    if not a.n_dirs:
        return _wrap(T.softmax(a.data, axis=-1), a)
    v, s1, s2 = _slots(a)
    p = T.softmax(v, axis=-1)
    c = s1 - T.tsum(p * s1, -1, keepdims=True)
    d2 = None
    if a.order >= 2:
        inner = c * s1 + s2
        d2 = p * (c * c + s2 - T.tsum(p * inner, -1, keepdims=True))
    return _restack(a, p, p * c, d2)


ACTIVATIONS: dict[str, Callable[[Jet], Jet]] = {
    "tanh": tanh,
    "swish": swish,
    "sigmoid": sigmoid,
    "sin": sin,
    "identity": identity,
    "linear": identity,
}


def activation(name: str) -> Callable[[Jet], Jet]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


def eval_with_coordinate_jets(model: Callable[[Jet], Jet], point, directions: Sequence[int],
                              order: int = 2) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Value and first/second derivatives of ``model`` along each direction.

    All directions are propagated in one batched pass; the value slot is
    shared between them.
    """
    x = seed(np.asarray(point, dtype=float), list(directions), order=order)
    out = lift(model(x))
    od = out.data.data
    val = od[0]
    res = []
    for i in range(len(directions)):
        d1 = od[1 + i] if out.n_dirs else np.zeros_like(val)
        d2 = od[1 + out.n_dirs + i] if out.n_dirs and out.order >= 2 else np.zeros_like(val)
        res.append((val, d1, d2))
    return res
