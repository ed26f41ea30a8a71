"""Pointwise error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _pair(h, h_hat) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=float).ravel()
    h_hat = np.asarray(h_hat, dtype=float).ravel()
    if h.shape != h_hat.shape:
        raise ValueError(f"length mismatch: {h.size} true values vs {h_hat.size} predictions")
    return h, h_hat


@dataclass
class ModifiedRelativeError:
    values: np.ndarray
    mean: float
    std: float


def modified_relative_error(h, h_hat) -> ModifiedRelativeError:
    """|h - h_hat| / (1 + |h|): relative where |h| >> 1, absolute near zero."""
    h, h_hat = _pair(h, h_hat)
    e = np.abs(h - h_hat) / (1.0 + np.abs(h))
    if e.size == 0:
        return ModifiedRelativeError(e, math.nan, math.nan)
    return ModifiedRelativeError(e, float(e.mean()), float(e.std()))


@dataclass
class StandardMetrics:
    rmse: float
    mae: float
    nrmse: float | None
    mape: float | None
    undefined: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {"RMSE": self.rmse, "MAE": self.mae, "nRMSE": self.nrmse, "MAPE": self.mape}


def standard_metrics(h, h_hat) -> StandardMetrics:
    """RMSE, MAE and the normalised nRMSE = RMSE / rms(h), MAPE = MAE / mean|h|.

    A zero normaliser leaves the metric as ``None`` and lists it in ``undefined``.
    """
    h, h_hat = _pair(h, h_hat)
    d = h - h_hat
    rmse = float(np.sqrt(np.mean(d * d)))
    mae = float(np.mean(np.abs(d)))
    rms_h = float(np.sqrt(np.mean(h * h)))
    mean_abs = float(np.mean(np.abs(h)))
    undefined = []
    nrmse = rmse / rms_h if rms_h > 0 else None
    mape = mae / mean_abs if mean_abs > 0 else None
    if nrmse is None:
        undefined.append("nRMSE")
    if mape is None:
        undefined.append("MAPE")
    return StandardMetrics(rmse, mae, nrmse, mape, tuple(undefined))


def velocity_magnitude(u, v) -> np.ndarray:
    return np.sqrt(np.asarray(u, dtype=float) ** 2 + np.asarray(v, dtype=float) ** 2)
