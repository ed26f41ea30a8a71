"""Physics-informed objective and the data-driven alternative.

For conditions k = 1..K the objective is

    sum_k  lam1 / N_c  sum_j |r(X_j; b_k)|^2  +  lam2 / N_ib  sum_j w_j |b_k(X_j) - G(X_j; b_k)|^2

where r stacks every residual component of the problem and periodic pairs
contribute |G(left) - G(right)|^2 to the boundary sum.  All conditions are
evaluated in one batched forward pass with a leading condition axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import jet as J
from ..autodiff.tensor import Tensor, tsum
from ..problems.base import BoundarySequence, CollocationSet, PdeProblem
from ..problems.residuals import Bundle


class NonFiniteResidualError(FloatingPointError):
    pass


@dataclass
class LossWeights:
    physics: float = 1.0
    boundary: float = 1.0
    overrides: dict = field(default_factory=dict)  # e.g. {"zero_value": 100.0}

    def __post_init__(self):
        if self.physics < 0 or self.boundary < 0 or any(v < 0 for v in self.overrides.values()):
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossBreakdown:
    physics: np.ndarray   # per condition, unweighted mean squared residual
    boundary: np.ndarray  # per condition, unweighted (segment-weighted) mean squared mismatch
    weights: LossWeights
    total: float
    condition_ids: list

    @property
    def physics_term(self) -> float:
        return float(self.weights.physics * self.physics.sum())

    @property
    def boundary_term(self) -> float:
        return float(self.weights.boundary * self.boundary.sum())


def stack_sequences(seqs: list[BoundarySequence]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s.coords for s in seqs]), np.stack([s.values for s in seqs])


def boundary_data(problem: PdeProblem, conds, points: np.ndarray, weights: LossWeights):
    """Targets and per-entry weights, each (K, n, s)."""
    tg, wt = [], []
    for c in conds:
        t, w = problem.boundary_targets(c, points)
        if "zero_value" in weights.overrides:
            w = np.where((t == 0.0) & (w > 0), weights.overrides["zero_value"], w)
        tg.append(t)
        wt.append(w)
    return np.stack(tg), np.stack(wt)


def _check_finite(res: list[Tensor], X: np.ndarray, conds) -> None:
    for r in res:
        bad = ~np.isfinite(r.data)
        if bad.any():
            k, j = np.argwhere(bad)[0]
            raise NonFiniteResidualError(
                f"non-finite residual for condition {conds[k].id} at point {X[j].tolist()}")


def physics_loss(model, P, problem: PdeProblem, batch: CollocationSet, seqs: list[BoundarySequence],
                 conds, weights: LossWeights = LossWeights(), targets=None) -> tuple[Tensor, LossBreakdown]:
    """Eq.-3 style loss for one collocation batch shared by all K conditions.

    ``targets`` may carry precomputed :func:`boundary_data` for ``batch.boundary``.
    """
    K = len(conds)
    if K == 0 or len(seqs) != K:
        raise ValueError("need one boundary sequence per condition")
    n_c = len(batch.interior)
    if n_c == 0:
        raise ValueError("empty collocation batch")
    tx, tv = stack_sequences(seqs)
    d = problem.d

    Xi = np.broadcast_to(batch.interior, (K,) + batch.interior.shape)
    xj = J.seed(Xi, list(range(d)), order=problem.jet_order)
    out = model.apply_tokens(P, xj, tx, tv)
    res = problem.residuals(Bundle.from_output(out, problem.fields, problem.coords), conds[0]) \
        if K == 1 else _residuals_per_condition(problem, out, conds)
    _check_finite(res, batch.interior, conds)
    phys = None
    for r in res:
        sq = tsum(r * r, -1)
        phys = sq if phys is None else phys + sq
    phys = phys * (1.0 / n_c)

    n_ib = batch.n_ib
    bnd = None
    if len(batch.boundary):
        if targets is None:
            targets = boundary_data(problem, conds, batch.boundary, weights)
        tg, wt = targets
        Xb = np.broadcast_to(batch.boundary, (K,) + batch.boundary.shape)
        g = model.apply_tokens(P, Xb, tx, tv).value
        diff = g - tg
        bnd = tsum(tsum(diff * diff * wt, -1), -1)
    if len(batch.pairs):
        Xp = np.broadcast_to(batch.pairs, (K,) + batch.pairs.shape)
        g = model.apply_tokens(P, Xp.reshape(K, -1, d), tx, tv).value
        g = g.reshape((K, len(batch.pairs), 2, problem.s))
        diff = g[:, :, 0, :] - g[:, :, 1, :]
        pb = tsum(tsum(diff * diff, -1), -1)
        bnd = pb if bnd is None else bnd + pb
    if bnd is not None:
        bnd = bnd * (1.0 / n_ib)

    per_k = phys * weights.physics
    if bnd is not None:
        per_k = per_k + bnd * weights.boundary
    total = tsum(per_k, -1)
    bd = LossBreakdown(phys.data.copy(), bnd.data.copy() if bnd is not None else np.zeros(K), weights,
                       float(total.data), [c.id for c in conds])
    return total, bd


def _residuals_per_condition(problem, out, conds):
    """Residuals whose coefficients depend on the condition (Reynolds number)."""
    params = {getattr(problem, "reynolds", lambda c: None)(c) for c in conds}
    bundle = Bundle.from_output(out, problem.fields, problem.coords)
    if len(params) == 1:
        return problem.residuals(bundle, conds[0])
    # condition-dependent coefficients: broadcast 1/Re along the condition axis
    return problem.residuals(bundle, _Broadcast(conds))


class _Broadcast:
    """Condition stand-in whose Reynolds number is a (K, 1) array."""

    def __init__(self, conds):
        self.id = "batch"
        self.params = {"Re": np.array([[c.params["Re"]] for c in conds])}


def data_loss(model, P, points: np.ndarray, seqs: list[BoundarySequence], values: np.ndarray) -> Tensor:
    """Mean squared error against reference values of shape (K, n, s)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty reference")
    tx, tv = stack_sequences(seqs)
    K = len(seqs)
    X = np.broadcast_to(points, (K,) + np.shape(points)) if np.ndim(points) == 2 else points
    g = model.apply_tokens(P, X, tx, tv).value
    diff = g - values
    return tsum(tsum(tsum(diff * diff, -1), -1), -1) * (1.0 / values.size)
