"""Self-convergence of the discrete cross-attention toward its kernel integral.

Tokens sit at the midpoints s_i = (i + 1/2) / L of a parametrisation of the
boundary, so the attention output

    sum_i softmax_i(<A mu, B k(s_i)>) R v(s_i)

is a ratio of two midpoint rules and converges at O(L^-2) to the continuous
kernel integral as L grows.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..autodiff import jet as J
from .model import PintoModel, cau_forward


def midpoint_tokens(L: int) -> np.ndarray:
    return (np.arange(L) + 0.5) / L


def _default_coords(s: np.ndarray, d: int) -> np.ndarray:
    pts = np.zeros((len(s), d))
    pts[:, 0] = s
    return pts


def cau_output_for(model: PintoModel, j: int, mu, boundary_fn: Callable, L: int,
                   coord_fn: Callable | None = None) -> np.ndarray:
    """Output of CAU ``j`` for one query embedding ``mu`` with ``L`` midpoint tokens."""
    cfg = model.config
    P = model.params.leaves()
    s = midpoint_tokens(L)
    coords = coord_fn(s) if coord_fn is not None else _default_coords(s, cfg.coord_dim)
    vals = np.asarray(boundary_fn(s), dtype=float).reshape(L, cfg.value_dim)
    keys, values = model.encode_boundary(P, coords, vals)
    mu = np.asarray(mu, dtype=float).reshape(1, cfg.embed_dim)
    out = cau_forward(P, j, mu, keys, values, heads=cfg.heads, m=cfg.embed_dim,
                      act=J.activation(cfg.cau_activation), dense_layers=cfg.cau_dense_layers)
    return np.asarray(out.value.data)[0]


def kernel_integral_quadrature_check(model: PintoModel, mu, boundary_fn: Callable, L_values: Sequence[int],
                                     j: int = 0, coord_fn: Callable | None = None) -> np.ndarray:
    """Max-norm output change between successive token counts in ``L_values``."""
    outs = [cau_output_for(model, j, mu, boundary_fn, int(L), coord_fn) for L in L_values]
    return np.array([float(np.max(np.abs(b - a))) for a, b in zip(outs[:-1], outs[1:])])
