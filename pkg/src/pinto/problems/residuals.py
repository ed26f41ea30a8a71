"""PDE residual evaluators over coordinate-jet bundles.

Residuals return taped :class:`Tensor` values, so a loss built from them can
be differentiated with respect to the network parameters.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..autodiff import jet as J
from ..autodiff.jet import Jet
from ..autodiff.tensor import Tensor


class MissingDirectionError(ValueError):
    pass


class Bundle:
    """Solution fields carried as jets along named coordinate directions.

    ``fields`` maps a field name to a Jet whose derivative slots follow the
    order of ``dirs``.
    """

    def __init__(self, fields: Mapping[str, Jet], dirs: Sequence[str]):
        self.fields = {k: J.lift(v) for k, v in fields.items()}
        self.dirs = tuple(dirs)
        for name, jet in self.fields.items():
            if jet.n_dirs not in (0, len(self.dirs)):
                raise ValueError(f"field {name!r} carries {jet.n_dirs} directions, bundle declares {len(self.dirs)}")

    @classmethod
    def from_output(cls, out: Jet, field_names: Sequence[str], dirs: Sequence[str]) -> "Bundle":
        """Split a model output of shape (..., s) into named fields."""
        return cls({f: J.component(out, i) for i, f in enumerate(field_names)}, dirs)

    def _slot(self, field: str, coord: str, order: int) -> Tensor:
        jet = self.fields[field]
        if coord not in self.dirs:
            raise MissingDirectionError(f"no jet direction {coord!r} (have {self.dirs})")
        if order == 2 and jet.order < 2:
            raise MissingDirectionError(f"second derivative along {coord!r} needs an order-2 jet")
        D = len(self.dirs)
        i = self.dirs.index(coord)
        if jet.n_dirs == 0:
            return jet.value * 0.0
        return jet.data[1 + i + (D if order == 2 else 0)]

    def value(self, field: str) -> Tensor:
        return self.fields[field].value

    def d1(self, field: str, coord: str) -> Tensor:
        return self._slot(field, coord, 1)

    def d2(self, field: str, coord: str) -> Tensor:
        return self._slot(field, coord, 2)

    def require(self, coords: Sequence[str], order: int) -> None:
        for c in coords:
            for f in self.fields:
                self._slot(f, c, order)


def advection_residual(b: Bundle, beta: float) -> Tensor:
    """u_t + beta u_x."""
    return b.d1("u", "t") + beta * b.d1("u", "x")


def burgers_residual(b: Bundle, nu: float) -> Tensor:
    """u_t + u u_x - nu u_xx."""
    u = b.value("u")
    return b.d1("u", "t") + u * b.d1("u", "x") - nu * b.d2("u", "x")


def ns_residual(b: Bundle, Re: float, steady: bool) -> tuple[Tensor, Tensor, Tensor]:
    """Incompressible Navier-Stokes momentum (x, y) and continuity residuals."""
    if not steady:
        b.require(["t"], 1)
    b.require(["x", "y"], 2)
    u, v = b.value("u"), b.value("v")
    ux, uy = b.d1("u", "x"), b.d1("u", "y")
    vx, vy = b.d1("v", "x"), b.d1("v", "y")
    inv = 1.0 / Re
    rx = u * ux + v * uy + b.d1("p", "x") - inv * (b.d2("u", "x") + b.d2("u", "y"))
    ry = u * vx + v * vy + b.d1("p", "y") - inv * (b.d2("v", "x") + b.d2("v", "y"))
    if not steady:
        rx = rx + b.d1("u", "t")
        ry = ry + b.d1("v", "t")
    return rx, ry, ux + vy
