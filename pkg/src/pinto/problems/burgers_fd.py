"""Periodic finite-difference oracle for 1D Burgers and linear transport.

Burgers mode: Crank-Nicolson for the diffusion term and second-order
Adams-Bashforth for the conservative central flux (u^2/2)_x.  The periodic CN
system is circulant, so it is diagonalised by the FFT.

Advection mode: first-order upwind transport u_t + beta u_x = 0 with forward
Euler, used as an independent cross-check of the exact shifted profile.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .fields import ReferenceField


class InstabilityError(RuntimeError):
    pass


def _initial(u0, nx: int, width: float) -> np.ndarray:
    if callable(u0):
        return np.asarray(u0(np.arange(nx) * width / nx), dtype=float)
    u = np.asarray(u0, dtype=float)
    if u.shape != (nx,):
        raise ValueError(f"initial grid has shape {u.shape}, expected ({nx},)")
    return u.copy()


def _flux_div(u: np.ndarray, dx: float) -> np.ndarray:
    f = 0.5 * u * u
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * dx)


def burgers_fd_solve(u0, nu: float, t_end: float, nx: int, nt: int, *, width: float = 1.0,
                     cfl: float = 0.4, mode: str = "burgers", beta: float = 0.0,
                     track_mass: bool = False) -> ReferenceField:
    """Solve on x_j = j width / nx (periodic), reporting nt + 1 equispaced times.

    ``u0`` is either the grid values or a callable.  The internal step is the
    largest one dividing the output interval that satisfies
    ``dt <= cfl dx / max|u0|`` (Burgers; max|u| is non-increasing) or
    ``dt <= cfl dx / |beta|`` (advection).
    """
    if nx < 4 or nt < 1 or t_end < 0:
        raise ValueError("need nx >= 4, nt >= 1 and t_end >= 0")
    if mode not in ("burgers", "advection"):
        raise ValueError(f"unknown mode {mode!r}")
    dx = width / nx
    u = _initial(u0, nx, width)
    speed = abs(beta) if mode == "advection" else float(np.max(np.abs(u)))
    dt_out = t_end / nt
    dt_bound = cfl * dx / speed if speed > 0 else math.inf
    sub = max(1, math.ceil(dt_out / dt_bound - 1e-12)) if dt_out > 0 else 1
    dt = dt_out / sub

    k = np.fft.rfftfreq(nx, d=1.0 / nx)
    lap = -4.0 / dx ** 2 * np.sin(math.pi * k / nx) ** 2
    cn_num = 1.0 + 0.5 * dt * nu * lap
    cn_den = 1.0 - 0.5 * dt * nu * lap

    out = np.empty((nx, nt + 1))
    out[:, 0] = u
    masses = [float(u.sum() * dx)]
    prev_n = None
    step = 0
    for j in range(1, nt + 1):
        for _ in range(sub):
            if mode == "advection":
                if beta >= 0:
                    u = u - beta * dt / dx * (u - np.roll(u, 1))
                else:
                    u = u - beta * dt / dx * (np.roll(u, -1) - u)
            else:
                n_cur = -_flux_div(u, dx)
                explicit = n_cur if prev_n is None else 1.5 * n_cur - 0.5 * prev_n
                prev_n = n_cur
                rhs = np.fft.rfft(u) * cn_num + dt * np.fft.rfft(explicit)
                u = np.fft.irfft(rhs / cn_den, n=nx)
            step += 1
            if track_mass:
                masses.append(float(u.sum() * dx))
            if not np.all(np.isfinite(u)):
                raise InstabilityError(
                    f"non-finite solution at step {step}: dt={dt:.3e} violates the stable step bound "
                    f"dt <= cfl*dx/max|u| = {dt_bound:.3e} (cfl={cfl}, dx={dx:.3e})")
        out[:, j] = u
    field = ReferenceField({"x": np.arange(nx) * dx, "t": np.linspace(0.0, t_end, nt + 1)}, {"u": out},
                           "fd-oracle", {"nu": nu, "substeps": sub, "dt": dt, "mode": mode})
    if track_mass:
        field.meta["mass"] = np.array(masses)
    return field


def periodic_interp(field: ReferenceField, x, t_index: int) -> np.ndarray:
    """Linear interpolation of one time column at arbitrary x (periodic)."""
    xs = field.axes["x"]
    nx = len(xs)
    width = xs[1] * nx
    pos = np.mod(np.asarray(x, dtype=float), width) / xs[1]
    i0 = np.floor(pos).astype(int) % nx
    w = pos - np.floor(pos)
    col = field.values["u"][:, t_index]
    return (1.0 - w) * col[i0] + w * col[(i0 + 1) % nx]


def convergence_rates(errors) -> np.ndarray:
    """Observed orders log2(e_h / e_{h/2}) for successive grid doublings."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


def cole_hopf_study(nu: float = 0.05, t_end: float = 0.5, grids=(256, 512, 1024),
                    solution: Callable | None = None) -> tuple[list[float], np.ndarray]:
    """Max-norm error at t_end against the single-mode Cole-Hopf solution."""
    from .analytic import cole_hopf_solution

    sol = solution or (lambda x, t: cole_hopf_solution(x, t, nu))
    errs = []
    for nx in grids:
        f = burgers_fd_solve(lambda x: sol(x, 0.0), nu, t_end, nx, 1)
        errs.append(float(np.max(np.abs(f.values["u"][:, -1] - sol(f.axes["x"], t_end)))))
    return errs, convergence_rates(errs)
