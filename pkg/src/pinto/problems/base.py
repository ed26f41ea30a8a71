"""The five benchmark problems: domains, residuals, boundary data and oracles."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..autodiff.tensor import Tensor
from .analytic import advection_exact, beltrami_solution, kovasznay_solution
from .burgers_fd import burgers_fd_solve
from .cavity import lid_cavity_solve
from .conditions import Condition, ConditionFamily, condition_function, condition_rng
from .fields import ReferenceField
from .residuals import Bundle, advection_residual, burgers_residual, ns_residual


@dataclass
class BoundarySequence:
    """L tokens (coordinate, value) describing one initial/boundary condition."""

    coords: np.ndarray
    values: np.ndarray
    condition_id: str

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if len(self.coords) < 1 or len(self.coords) != len(self.values):
            raise ValueError("boundary sequence needs L >= 1 tokens with one value row each")

    def __len__(self) -> int:
        return len(self.coords)


@dataclass
class CollocationSet:
    """Interior residual points plus initial/boundary points.

    ``pairs`` holds periodic point pairs (left, right) of shape (P, 2, d);
    their mismatch counts toward the boundary term.
    """

    interior: np.ndarray
    boundary: np.ndarray
    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 0)))

    @property
    def n_ib(self) -> int:
        return len(self.boundary) + len(self.pairs)


def _uniform_open(rng, lo, hi, size):
    x = rng.uniform(lo, hi, size=size)
    bad = (x <= lo) | (x >= hi)
    while np.any(bad):
        x[bad] = rng.uniform(lo, hi, size=int(bad.sum()))
        bad = (x <= lo) | (x >= hi)
    return x


def _perimeter_points(bounds2, s: np.ndarray) -> np.ndarray:
    """Map arc-length fractions s in [0,1) to points on a rectangle's boundary."""
    (x0, x1), (y0, y1) = bounds2
    w, h = x1 - x0, y1 - y0
    d = np.mod(s, 1.0) * 2 * (w + h)
    pts = np.empty((len(d), 2))
    for i, a in enumerate(d):
        if a < w:
            pts[i] = (x0 + a, y0)
        elif a < w + h:
            pts[i] = (x1, y0 + a - w)
        elif a < 2 * w + h:
            pts[i] = (x1 - (a - w - h), y1)
        else:
            pts[i] = (x0, y1 - (a - 2 * w - h))
    return pts


def _side_points(rng, bounds2, n: int) -> np.ndarray:
    """n random points spread evenly over the four sides."""
    (x0, x1), (y0, y1) = bounds2
    counts = [n // 4 + (1 if i < n % 4 else 0) for i in range(4)]
    out = []
    for side, c in enumerate(counts):
        if side < 2:
            xs = rng.uniform(x0, x1, c)
            out.append(np.c_[xs, np.full(c, y0 if side == 0 else y1)])
        else:
            ys = rng.uniform(y0, y1, c)
            out.append(np.c_[np.full(c, x0 if side == 2 else x1), ys])
    return np.concatenate(out) if out else np.zeros((0, 2))


class PdeProblem:
    """Base class; subclasses fill in the class attributes and hooks."""

    name = ""
    coords: tuple = ()
    fields: tuple = ()
    bounds: tuple = ()
    steady = True
    value_dim = 1
    jet_order = 2
    family_kind = ""
    periodic: tuple = ()  # coordinates whose upper bound is identified with the lower one

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def s(self) -> int:
        return len(self.fields)

    def family(self, **kw) -> ConditionFamily:
        raise NotImplementedError

    def residuals(self, bundle: Bundle, cond: Condition) -> list[Tensor]:
        raise NotImplementedError

    def jet_dirs(self) -> tuple:
        return self.coords

    def boundary_targets(self, cond: Condition, points: np.ndarray):
        """(targets, weights), both (n, s); a zero weight leaves a field free."""
        raise NotImplementedError

    def token_values(self, cond: Condition, coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def token_coords(self, L: int, seed: int) -> np.ndarray:
        raise NotImplementedError

    def reference(self, cond: Condition, axes: dict) -> ReferenceField:
        raise NotImplementedError

    def sample_boundary(self, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def eval_axes(self, scale: str = "desk") -> dict:
        raise NotImplementedError

    def contains(self, X: np.ndarray, strict: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ok = np.ones(X.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.bounds):
            ok &= (X[..., k] > lo) & (X[..., k] < hi) if strict else (X[..., k] >= lo) & (X[..., k] <= hi)
        return ok

    def on_boundary(self, X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """True where a point lies on the initial/boundary part of the domain."""
        X = np.asarray(X, dtype=float)
        hit = np.zeros(X.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.bounds):
            if self.coords[k] == "t":
                hit |= np.abs(X[..., k] - lo) <= tol
            else:
                hit |= (np.abs(X[..., k] - lo) <= tol) | (np.abs(X[..., k] - hi) <= tol)
        return hit & self.contains(X)

    def model_config(self, **kw):
        from ..nn.model import PintoConfig

        base = dict(coord_dim=self.d, value_dim=self.value_dim, out_dim=self.s)
        base.update(kw)
        return PintoConfig(**base)

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


# -- 1D transport problems -------------------------------------------------------------


class _Periodic1D(PdeProblem):
    coords = ("x", "t")
    fields = ("u",)
    bounds = ((0.0, 1.0), (0.0, 1.0))
    steady = False
    periodic = ("x",)

    def token_coords(self, L: int, seed: int = 0) -> np.ndarray:
        x = np.arange(L) / L
        return np.c_[x, np.zeros(L)]

    def token_values(self, cond, coords):
        return condition_function(cond)(coords[:, 0])[:, None]

    def boundary_targets(self, cond, points):
        u = condition_function(cond)(points[:, 0])[:, None]
        return u, np.ones_like(u)

    def sample_boundary(self, rng, n):
        """Initial-line points and periodic (0,t)/(1,t) pairs, split evenly."""
        n_init = n - n // 2
        x = rng.uniform(0.0, 1.0, n_init)
        init = np.c_[x, np.zeros(n_init)]
        t = rng.uniform(*self.bounds[1], n // 2)
        pairs = np.stack([np.c_[np.zeros_like(t), t], np.c_[np.ones_like(t), t]], axis=1)
        return init, pairs

    def eval_axes(self, scale="desk"):
        if scale == "paper":
            return {"x": np.arange(1024) / 1024, "t": np.linspace(0.0, 1.0, 100)}
        return {"x": np.arange(128) / 128, "t": np.linspace(0.0, 1.0, 21)}


class Advection(_Periodic1D):
    name = "advection"
    jet_order = 1
    family_kind = "sinusoidal"

    def __init__(self, beta: float = 0.1):
        self.beta = float(beta)

    def family(self, **kw):
        base = dict(kind="sinusoidal", seed=0, n_seen=80, n_unseen=20, N=2, n_max=4)
        base.update(kw)
        return ConditionFamily(**base)

    def residuals(self, bundle, cond):
        return [advection_residual(bundle, self.beta)]

    def reference(self, cond, axes):
        x, t = np.asarray(axes["x"]), np.asarray(axes["t"])
        X, Tm = np.meshgrid(x, t, indexing="ij")
        u = advection_exact(X, Tm, condition_function(cond), self.beta, 1.0)
        return ReferenceField({"x": x, "t": t}, {"u": u}, "analytic", {"condition": cond.id})


class Burgers(_Periodic1D):
    name = "burgers"
    family_kind = "grf"

    def __init__(self, nu: float = 0.01, grid_n: int = 1024):
        self.nu = float(nu)
        self.grid_n = grid_n

    def family(self, **kw):
        base = dict(kind="grf", seed=0, n_seen=80, n_unseen=20, grid_n=self.grid_n)
        base.update(kw)
        return ConditionFamily(**base)

    def residuals(self, bundle, cond):
        return [burgers_residual(bundle, self.nu)]

    def reference(self, cond, axes, dt_out: float = 0.01):
        x, t = np.asarray(axes["x"], dtype=float), np.asarray(axes["t"], dtype=float)
        ic = condition_function(cond)
        t_end = float(t.max())
        nt = max(1, int(round(t_end / dt_out)))
        f = _burgers_cached(cond.id, ic.on_grid().tobytes(), self.nu, t_end, self.grid_n, nt)
        interp = RegularGridInterpolator(
            (np.append(f.axes["x"], 1.0), f.axes["t"]),
            np.vstack([f.values["u"], f.values["u"][:1]]))
        X, Tm = np.meshgrid(np.mod(x, 1.0), t, indexing="ij")
        u = interp(np.stack([X.ravel(), Tm.ravel()], -1)).reshape(X.shape)
        return ReferenceField({"x": x, "t": t}, {"u": u}, "fd-oracle", {"condition": cond.id})


class ConstantTransport(_Periodic1D):
    """u_t = 0 with a constant initial value: a convex-adjacent sanity problem."""

    name = "toy"
    jet_order = 1
    family_kind = "constant"

    def family(self, **kw):
        base = dict(kind="constant", seed=0, seen_values=(0.5,), unseen_values=(0.25,))
        base.update(kw)
        return ConditionFamily(**base)

    def residuals(self, bundle, cond):
        return [bundle.d1("u", "t")]

    def reference(self, cond, axes):
        x, t = np.asarray(axes["x"]), np.asarray(axes["t"])
        u = np.full((len(x), len(t)), float(cond.params["value"]))
        return ReferenceField({"x": x, "t": t}, {"u": u}, "analytic", {"condition": cond.id})


@functools.lru_cache(maxsize=64)
def _burgers_cached(cid, u0_bytes, nu, t_end, nx, nt):
    u0 = np.frombuffer(u0_bytes, dtype=float)
    return burgers_fd_solve(u0, nu, t_end, nx, nt)


# -- Navier-Stokes problems ------------------------------------------------------------


class _NavierStokes(PdeProblem):
    fields = ("u", "v", "p")

    def residuals(self, bundle, cond):
        return list(ns_residual(bundle, self.reynolds(cond), self.steady))

    def reynolds(self, cond):
        """Scalar Re, or a (K, 1) array when conditions are batched."""
        re = cond.params["Re"]
        return re if isinstance(re, np.ndarray) else float(re)

    def spatial_bounds(self):
        return self.bounds[:2]


class Kovasznay(_NavierStokes):
    name = "kovasznay"
    coords = ("x", "y")
    bounds = ((-0.5, 1.0), (-0.5, 1.5))
    steady = True
    value_dim = 3
    family_kind = "reynolds"

    def family(self, **kw):
        base = dict(kind="reynolds", seed=0, seen_values=(20.0, 30.0, 50.0, 80.0), n_unseen=20,
                    value_range=(10.0, 100.0))
        base.update(kw)
        return ConditionFamily(**base)

    def _solution(self, cond, pts):
        return np.stack(kovasznay_solution(pts[:, 0], pts[:, 1], self.reynolds(cond)), axis=-1)

    def token_coords(self, L, seed=0):
        return _perimeter_points(self.bounds, np.arange(L) / L)

    def token_values(self, cond, coords):
        return self._solution(cond, coords)

    def boundary_targets(self, cond, points):
        u = self._solution(cond, points)
        return u, np.ones_like(u)

    def sample_boundary(self, rng, n):
        return _side_points(rng, self.bounds, n), np.zeros((0, 2, 2))

    def reference(self, cond, axes):
        x, y = np.asarray(axes["x"]), np.asarray(axes["y"])
        X, Y = np.meshgrid(x, y, indexing="ij")
        u, v, p = kovasznay_solution(X, Y, self.reynolds(cond))
        return ReferenceField({"x": x, "y": y}, {"u": u, "v": v, "p": p}, "analytic", {"condition": cond.id})

    def eval_axes(self, scale="desk"):
        n = 256 if scale == "paper" else 64
        return {"x": np.linspace(*self.bounds[0], n), "y": np.linspace(*self.bounds[1], n)}


class Beltrami(_NavierStokes):
    name = "beltrami"
    coords = ("x", "y", "t")
    bounds = ((0.0, 1.0), (0.0, 1.0), (0.0, 2.0))
    steady = False
    value_dim = 3
    family_kind = "reynolds"

    def family(self, **kw):
        base = dict(kind="reynolds", seed=0, seen_values=(10.0, 50.0, 100.0), n_unseen=20,
                    value_range=(10.0, 150.0))
        base.update(kw)
        return ConditionFamily(**base)

    def _solution(self, cond, pts):
        return np.stack(beltrami_solution(pts[:, 0], pts[:, 1], pts[:, 2], self.reynolds(cond)), axis=-1)

    def sample_boundary(self, rng, n):
        """Two thirds on the side walls over time, one third on the t=0 plane."""
        n_side = (2 * n) // 3
        side = _side_points(rng, self.bounds[:2], n_side)
        side = np.c_[side, rng.uniform(*self.bounds[2], n_side)]
        n_init = n - n_side
        init = np.c_[rng.uniform(*self.bounds[0], n_init), rng.uniform(*self.bounds[1], n_init), np.zeros(n_init)]
        return np.concatenate([side, init]), np.zeros((0, 2, 3))

    def token_coords(self, L, seed=0):
        """L tokens subsampled from a pooled initial + boundary point set."""
        rng = condition_rng(seed, 20_000)
        pool, _ = self.sample_boundary(rng, max(3 * L, 30))
        idx = np.sort(rng.choice(len(pool), size=L, replace=False))
        return pool[idx]

    def token_values(self, cond, coords):
        return self._solution(cond, coords)

    def boundary_targets(self, cond, points):
        u = self._solution(cond, points)
        return u, np.ones_like(u)

    def reference(self, cond, axes):
        x, y, t = (np.asarray(axes[k]) for k in ("x", "y", "t"))
        X, Y, Tm = np.meshgrid(x, y, t, indexing="ij")
        u, v, p = beltrami_solution(X, Y, Tm, self.reynolds(cond))
        return ReferenceField({"x": x, "y": y, "t": t}, {"u": u, "v": v, "p": p}, "analytic",
                              {"condition": cond.id})

    def eval_axes(self, scale="desk"):
        n, nt = (64, 20) if scale == "paper" else (32, 5)
        return {"x": np.linspace(0, 1, n), "y": np.linspace(0, 1, n), "t": np.linspace(0, 2, nt)}


class LidCavity(_NavierStokes):
    name = "lid"
    coords = ("x", "y")
    bounds = ((0.0, 1.0), (0.0, 1.0))
    steady = True
    value_dim = 1
    family_kind = "lid"
    zero_weight = 100.0

    def __init__(self, Re: float = 50.0, oracle_n: int = 128):
        self.Re = float(Re)
        self.oracle_n = oracle_n

    def reynolds(self, cond):
        return self.Re

    def family(self, **kw):
        base = dict(kind="lid", seed=0, seen_values=(1.0, 2.0, 3.0), unseen_values=(1.2, 1.5, 2.5, 3.5))
        base.update(kw)
        return ConditionFamily(**base)

    def _lid(self, cond):
        return float(cond.params["lid_velocity"])

    def wall_u(self, cond, pts):
        top = np.abs(pts[:, 1] - 1.0) <= 1e-12
        return np.where(top, self._lid(cond), 0.0)

    def token_coords(self, L, seed=0):
        return _perimeter_points(self.bounds, (np.arange(L) + 0.5) / L)

    def token_values(self, cond, coords):
        return self.wall_u(cond, coords)[:, None]

    def boundary_targets(self, cond, points):
        u = self.wall_u(cond, points)
        tgt = np.c_[u, np.zeros_like(u), np.zeros_like(u)]
        w = np.where(tgt == 0.0, self.zero_weight, 1.0)
        w[:, 2] = 0.0
        return tgt, w

    def sample_boundary(self, rng, n):
        return _side_points(rng, self.bounds, n), np.zeros((0, 2, 2))

    def reference(self, cond, axes):
        x, y = np.asarray(axes["x"]), np.asarray(axes["y"])
        f = _cavity_cached(self._lid(cond), self.Re, self.oracle_n)
        X, Y = np.meshgrid(x, y, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], -1)
        vals = {}
        for k in ("u", "v"):
            ip = RegularGridInterpolator((f.axes["x"], f.axes["y"]), f.values[k])
            vals[k] = ip(pts).reshape(X.shape)
        return ReferenceField({"x": x, "y": y}, vals, "fv-oracle", {"condition": cond.id})

    def eval_axes(self, scale="desk"):
        n = 256 if scale == "paper" else 64
        return {"x": np.linspace(0, 1, n), "y": np.linspace(0, 1, n)}


@functools.lru_cache(maxsize=32)
def _cavity_cached(lid, Re, n):
    return lid_cavity_solve(lid, Re, n)


# -- registry and samplers ---------------------------------------------------------------

PROBLEMS = {"advection": Advection, "burgers": Burgers, "kovasznay": Kovasznay, "beltrami": Beltrami,
            "lid": LidCavity, "toy": ConstantTransport}


def get_problem(name: str, **kw) -> PdeProblem:
    try:
        return PROBLEMS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def boundary_sequence(problem: PdeProblem, condition: Condition, L: int, seed: int = 0) -> BoundarySequence:
    if L < 1:
        raise ValueError("L must be >= 1")
    coords = problem.token_coords(L, seed)
    return BoundarySequence(coords, problem.token_values(condition, coords), condition.id)


def sample_collocation(problem: PdeProblem, N_c: int, N_ib: int, seed: int = 0) -> CollocationSet:
    """Uniform i.i.d. interior points and ``N_ib`` initial/boundary points."""
    if N_c < 1 or N_ib < 1:
        raise ValueError("point counts must be positive")
    rng = np.random.default_rng([int(seed), 7])
    interior = np.stack([_uniform_open(rng, lo, hi, N_c) for lo, hi in problem.bounds], axis=-1)
    boundary, pairs = problem.sample_boundary(rng, N_ib)
    return CollocationSet(interior, boundary, pairs)


def chi2_uniformity(points: np.ndarray, bounds, bins: int = 10) -> tuple[float, float]:
    """Chi-square statistic and p-value of a 2D histogram against uniformity."""
    from scipy.stats import chisquare

    (x0, x1), (y0, y1) = bounds[:2]
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=bins, range=[[x0, x1], [y0, y1]])
    res = chisquare(h.ravel())
    return float(res.statistic), float(res.pvalue)


def grid_points(axes: dict) -> np.ndarray:
    mesh = np.meshgrid(*axes.values(), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def uniform_axes(problem: PdeProblem, counts) -> dict:
    """Uniform grid with ``counts[k]`` nodes along coordinate k; periodic axes drop the endpoint."""
    counts = list(counts)
    if len(counts) != problem.d or any(int(n) < 1 for n in counts):
        raise ValueError(f"need {problem.d} positive grid sizes for coordinates {problem.coords}")
    axes = {}
    for name, (lo, hi), n in zip(problem.coords, problem.bounds, counts):
        n = int(n)
        if name in problem.periodic:
            axes[name] = lo + (hi - lo) * np.arange(n) / n
        else:
            axes[name] = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    return axes


def time_axis(problem: PdeProblem) -> int | None:
    return problem.coords.index("t") if "t" in problem.coords else None


__all__ = ["BoundarySequence", "CollocationSet", "PdeProblem", "Advection", "Burgers", "Kovasznay",
           "Beltrami", "LidCavity", "PROBLEMS", "get_problem", "boundary_sequence", "sample_collocation",
           "chi2_uniformity", "grid_points", "time_axis", "uniform_axes"]
