"""Finite-difference oracles used to check the analytic derivative paths."""

from __future__ import annotations

from typing import Callable

import numpy as np


def central_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2.0 * eps)
    return g


def derivatives_1d(f: Callable[[float], np.ndarray], x0: float, eps: float = 1e-4):
    """Fourth-order central estimates of f'(x0) and f''(x0)."""
    fm2, fm1, f0, fp1, fp2 = (np.asarray(f(x0 + k * eps)) for k in (-2, -1, 0, 1, 2))
    d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * eps)
    d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * eps ** 2)
    return d1, d2


def relative_error(a, b, floor: float = 1e-12) -> float:
    """max |a - b| scaled by max |b| (normwise, so near-zero entries do not dominate)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if not a.size:
        return 0.0
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))
