"""Closed-form reference solutions.

The Navier-Stokes solutions accept plain arrays or coordinate jets, so the
same formulas can be pushed through the residual evaluators.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..autodiff import jet as J
from ..autodiff.jet import Jet


def _exp(x):
    return J.exp(x) if isinstance(x, Jet) else np.exp(x)


def _sin(x):
    return J.sin(x) if isinstance(x, Jet) else np.sin(x)


def _cos(x):
    return J.cos(x) if isinstance(x, Jet) else np.cos(x)


def kovasznay_eta(Re: float) -> float:
    return 0.5 * Re - math.sqrt(0.25 * Re ** 2 + 4.0 * math.pi ** 2)


def kovasznay_solution(x, y, Re: float):
    """Steady Kovasznay flow (u, v, p)."""
    eta = kovasznay_eta(Re)
    ex = _exp(x * eta)
    u = 1.0 - ex * _cos(y * (2.0 * math.pi))
    v = ex * _sin(y * (2.0 * math.pi)) * (eta / (2.0 * math.pi))
    p = 0.5 * (1.0 - _exp(x * (2.0 * eta)))
    return u, v, p


def beltrami_solution(x, y, t, Re: float):
    """Decaying 2D Beltrami (Taylor-Green type) flow with nu = 1/Re."""
    nu = 1.0 / Re
    pi = math.pi
    decay = _exp(t * (-2.0 * pi ** 2 * nu))
    u = -(_cos(x * pi) * _sin(y * pi)) * decay
    v = _sin(x * pi) * _cos(y * pi) * decay
    p = (_cos(x * (2.0 * pi)) + _cos(y * (2.0 * pi))) * (-0.25) * _exp(t * (-4.0 * pi ** 2 * nu))
    return u, v, p


def advection_exact(x, t, u0: Callable, beta: float, width: float = 1.0):
    """Periodic transport solution u0((x - beta t) mod width)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return u0(np.mod(x - beta * t, width))


def cole_hopf_solution(x, t, nu: float, a: float = 2.0, b: float = 1.0, k: int = 1):
    """Periodic viscous Burgers solution from a single heat-equation mode.

    phi = a + b exp(-nu (2 pi k)^2 t) cos(2 pi k x) solves phi_t = nu phi_xx, and
    u = -2 nu phi_x / phi solves u_t + u u_x = nu u_xx.  Needs a > b > 0.
    """
    w = 2.0 * math.pi * k
    if isinstance(x, Jet) or isinstance(t, Jet):
        e = _exp(t * (-nu * w * w)) * b
        phi = e * _cos(x * w) + a
        phix = e * _sin(x * w) * (-w)
        return (phix * (-2.0 * nu)) / phi
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    e = b * np.exp(-nu * w * w * t)
    return 2.0 * nu * w * e * np.sin(w * x) / (a + e * np.cos(w * x))
