"""Initial/boundary condition families.

Every sampler is a pure function of ``(seed, index)``: the generator is seeded
with the pair, so conditions can be regenerated independently and in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def condition_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


# -- sinusoidal superposition -------------------------------------------------

@dataclass(frozen=True)
class SinusoidalIC:
    """u0(x) = sum_i a_i sin(2 pi n_i x / width + phi_i)."""

    amplitudes: tuple
    wavenumbers: tuple
    phases: tuple
    width: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, n, ph in zip(self.amplitudes, self.wavenumbers, self.phases):
            out = out + a * np.sin(2.0 * math.pi * n * x / self.width + ph)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, n, ph in zip(self.amplitudes, self.wavenumbers, self.phases):
            w = 2.0 * math.pi * n / self.width
            out = out + a * w * np.cos(w * x + ph)
        return out


def sinusoidal_ic(seed: int, index: int, N: int = 2, n_max: int = 4, domain_size: float = 1.0) -> SinusoidalIC:
    """Random superposition of ``N`` sine waves.

    Wave numbers are integers in [1, n_max], amplitudes uniform in [0, 1],
    phases uniform in (0, 2 pi).
    """
    if N < 1 or n_max < 1:
        raise ValueError("need N >= 1 and n_max >= 1")
    rng = condition_rng(seed, index)
    n = rng.integers(1, n_max + 1, size=N)
    a = rng.uniform(0.0, 1.0, size=N)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=N)
    # open interval at 0; uniform() may return the lower edge
    phi[phi == 0.0] = math.pi
    return SinusoidalIC(tuple(float(v) for v in a), tuple(int(v) for v in n),
                        tuple(float(v) for v in phi), float(domain_size))


# -- Gaussian random field ------------------------------------------------------

GRF_SCALE = 625.0
GRF_SHIFT = 25.0


def grf_eigenvalues(k: np.ndarray, scale: float = GRF_SCALE, shift: float = GRF_SHIFT) -> np.ndarray:
    """Covariance eigenvalues scale * (4 pi^2 k^2 + shift)^-2 on the unit periodic interval."""
    return scale * (4.0 * math.pi ** 2 * np.asarray(k, dtype=float) ** 2 + shift) ** -2


@dataclass(frozen=True)
class GrfIC:
    """Mean-zero periodic Gaussian field on [0, 1), stored by its Fourier coefficients."""

    cos_coef: np.ndarray = field(repr=False)
    sin_coef: np.ndarray = field(repr=False)
    grid_n: int = 0

    def __call__(self, x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        k = np.arange(1, len(self.cos_coef) + 1)
        ang = 2.0 * math.pi * np.multiply.outer(x, k)
        return np.cos(ang) @ self.cos_coef + np.sin(ang) @ self.sin_coef

    def on_grid(self) -> np.ndarray:
        return self(np.arange(self.grid_n) / self.grid_n)


def grf_ic(seed: int, index: int, grid_n: int = 1024) -> GrfIC:
    """Sample u0 ~ N(0, 625 (-Laplacian + 25 I)^-2) with periodic boundaries.

    The field is expanded in the orthonormal basis sqrt(2) cos(2 pi k x),
    sqrt(2) sin(2 pi k x) for 1 <= k <= grid_n/2 (the constant mode is dropped
    to keep the spatial mean at zero; the Nyquist sine vanishes on the grid and
    is omitted).  The returned object evaluates the trigonometric interpolant at
    any x and :meth:`GrfIC.on_grid` gives the sampled grid values.
    """
    if grid_n < 2 or grid_n & (grid_n - 1):
        raise ValueError("grid_n must be a power of two")
    rng = condition_rng(seed, index)
    kmax = grid_n // 2
    k = np.arange(1, kmax + 1)
    sd = np.sqrt(2.0 * grf_eigenvalues(k))
    xi_c = rng.standard_normal(kmax)
    xi_s = rng.standard_normal(kmax)
    cos_coef = sd * xi_c
    sin_coef = sd * xi_s
    sin_coef[-1] = 0.0
    return GrfIC(cos_coef, sin_coef, grid_n)


def grf_variance(grid_n: int) -> float:
    """Pointwise variance of the sampled field at grid nodes: 2 * sum_k lambda_k.

    (The Nyquist cosine equals +-1 on the nodes, so it contributes in full.)
    """
    k = np.arange(1, grid_n // 2 + 1)
    return float(2.0 * grf_eigenvalues(k).sum())


# -- condition records ------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """One member of a condition family: an id plus the numbers that define it."""

    id: str
    kind: str
    params: dict
    split: str = "seen"

    def describe(self) -> str:
        bits = ", ".join(f"{k}={v}" for k, v in self.params.items() if not isinstance(v, (list, tuple)))
        return f"{self.id} [{self.split}] {bits}"


@dataclass
class ConditionFamily:
    """Deterministic generator of conditions with disjoint seen/unseen splits.

    ``kind`` is one of ``sinusoidal``, ``grf``, ``reynolds`` or ``lid``.  For the
    random families the seen split uses indices ``0..n_seen-1`` and the unseen
    split ``n_seen..n_seen+n_unseen-1``.  For the scalar families explicit value
    lists can be given; otherwise unseen values are drawn uniformly from
    ``value_range`` with the family seed.
    """

    kind: str
    seed: int = 0
    n_seen: int = 8
    n_unseen: int = 2
    N: int = 2
    n_max: int = 4
    domain_size: float = 1.0
    grid_n: int = 1024
    seen_values: tuple = ()
    unseen_values: tuple = ()
    value_range: tuple = (10.0, 100.0)

    KINDS = ("sinusoidal", "grf", "reynolds", "lid", "constant")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown condition family {self.kind!r}")

    def _make(self, index: int, split: str) -> Condition:
        if self.kind == "sinusoidal":
            ic = sinusoidal_ic(self.seed, index, self.N, self.n_max, self.domain_size)
            params = {"index": index, "amplitudes": ic.amplitudes, "wavenumbers": ic.wavenumbers,
                      "phases": ic.phases, "width": ic.width}
            return Condition(f"sin-{self.seed}-{index}", self.kind, params, split)
        if self.kind == "grf":
            return Condition(f"grf-{self.seed}-{index}", self.kind,
                             {"index": index, "seed": self.seed, "grid_n": self.grid_n}, split)
        raise AssertionError

    def _scalar(self, value: float, split: str) -> Condition:
        name = {"reynolds": "Re", "lid": "lid_velocity", "constant": "value"}[self.kind]
        return Condition(f"{self.kind}-{value:g}", self.kind, {name: float(value)}, split)

    def seen(self) -> list[Condition]:
        if self.kind in ("sinusoidal", "grf"):
            return [self._make(i, "seen") for i in range(self.n_seen)]
        return [self._scalar(v, "seen") for v in self.seen_values]

    def unseen(self) -> list[Condition]:
        if self.kind in ("sinusoidal", "grf"):
            return [self._make(self.n_seen + i, "unseen") for i in range(self.n_unseen)]
        if self.unseen_values:
            return [self._scalar(v, "unseen") for v in self.unseen_values]
        rng = condition_rng(self.seed, 10_000)
        lo, hi = self.value_range
        vals = rng.uniform(lo, hi, size=self.n_unseen)
        return [self._scalar(round(float(v), 6), "unseen") for v in vals]

    def all(self) -> list[Condition]:
        return self.seen() + self.unseen()


def condition_function(cond: Condition) -> Callable:
    """Initial profile u0 for the 1D families."""
    p = cond.params
    if cond.kind == "sinusoidal":
        return SinusoidalIC(tuple(p["amplitudes"]), tuple(p["wavenumbers"]), tuple(p["phases"]), p["width"])
    if cond.kind == "grf":
        return grf_ic(p["seed"], p["index"], p["grid_n"])
    if cond.kind == "constant":
        c = float(p["value"])
        return lambda x: np.full(np.shape(x), c)
    raise ValueError(f"condition kind {cond.kind!r} has no initial profile")
