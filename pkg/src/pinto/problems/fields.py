"""Tensor-product reference fields and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROVENANCE = ("analytic", "fd-oracle", "fv-oracle", "imported-csv", "model")


@dataclass
class ReferenceField:
    """Values on a tensor-product grid.

    ``axes`` maps axis name to a strictly increasing 1D array; ``values`` maps
    field name to an array of shape ``tuple(len(a) for a in axes)`` (indexing
    ``ij``).
    """

    axes: dict
    values: dict
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = {k: np.asarray(v, dtype=float) for k, v in self.axes.items()}
        self.values = {k: np.asarray(v, dtype=float) for k, v in self.values.items()}
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        for name, a in self.axes.items():
            if a.ndim != 1 or len(a) == 0 or (len(a) > 1 and np.any(np.diff(a) <= 0)):
                raise ValueError(f"axis {name!r} is not strictly increasing")
        shape = self.shape
        for name, v in self.values.items():
            if v.shape != shape:
                raise ValueError(f"field {name!r} has shape {v.shape}, grid is {shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"field {name!r} has non-finite values")

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes.values())

    @property
    def axis_names(self) -> list[str]:
        return list(self.axes)

    @property
    def field_names(self) -> list[str]:
        return list(self.values)

    def points(self) -> np.ndarray:
        """All nodes as an (n_nodes, n_axes) array in row-major order."""
        mesh = np.meshgrid(*self.axes.values(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat(self, name: str) -> np.ndarray:
        return self.values[name].ravel()

    def with_values(self, values: dict, provenance: str) -> "ReferenceField":
        return ReferenceField(dict(self.axes), values, provenance, dict(self.meta))

    # -- CSV ----------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.axis_names + self.field_names)
        cols = np.column_stack([self.points()] + [self.flat(f) for f in self.field_names])
        for row in cols:
            w.writerow(["%.17g" % v for v in row])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, axis_names: list[str] | None = None,
                 provenance: str = "imported-csv") -> "ReferenceField":
        """Parse a node-per-row table.

        Leading columns are axes: ``axis_names`` if given, else every header
        entry among the usual coordinate names (x, y, z, t).
        """
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2:
            raise ValueError("CSV has no data rows")
        header = [h.strip() for h in rows[0]]
        if axis_names is None:
            axis_names = []
            for h in header:
                if h not in ("x", "y", "z", "t"):
                    break
                axis_names.append(h)
        n_ax = len(axis_names)
        if header[:n_ax] != list(axis_names) or n_ax == 0:
            raise ValueError(f"header {header} does not start with axes {axis_names}")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        axes = {a: np.unique(data[:, i]) for i, a in enumerate(axis_names)}
        shape = tuple(len(a) for a in axes.values())
        if int(np.prod(shape)) != len(data):
            raise ValueError("rows do not form a complete tensor-product grid")
        idx = tuple(np.searchsorted(axes[a], data[:, i]) for i, a in enumerate(axis_names))
        values = {}
        for j, name in enumerate(header[n_ax:]):
            arr = np.full(shape, np.nan)
            arr[idx] = data[:, n_ax + j]
            values[name] = arr
        return cls(axes, values, provenance)

    @classmethod
    def load_csv(cls, path, axis_names=None, provenance: str = "imported-csv") -> "ReferenceField":
        return cls.from_csv(Path(path).read_text(), axis_names, provenance)
