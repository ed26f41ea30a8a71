"""Model evaluation against oracles, error sweeps and report tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..problems.base import boundary_sequence, grid_points
from ..problems.conditions import Condition
from ..problems.fields import ReferenceField
from .core import modified_relative_error, standard_metrics, velocity_magnitude

METRIC_NAMES = ("mean_rel", "std_rel", "RMSE", "MAE", "nRMSE", "MAPE")
STD_NOTE = "std of the modified relative error is over pooled points"


@dataclass
class MetricRow:
    group: str          # condition id, or "seen" / "unseen" aggregate
    split: str
    time: float | None
    metrics: dict
    n_points: int = 0
    undefined: tuple = ()


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)
    quantity: str = "u"
    note: str = STD_NOTE

    def get(self, group: str, time: float | None = None) -> MetricRow:
        for r in self.rows:
            if r.group == group and (time is None or (r.time is not None and abs(r.time - time) < 1e-12)):
                return r
        raise KeyError(group)

    def aggregate(self, split: str) -> MetricRow:
        return self.get(split)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# quantity={self.quantity}; {self.note}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "split", "time", "n_points", *METRIC_NAMES, "undefined"])
        for r in self.rows:
            vals = ["" if r.metrics.get(k) is None else "%.17g" % r.metrics[k] for k in METRIC_NAMES]
            w.writerow([r.group, r.split, "" if r.time is None else "%.17g" % r.time, r.n_points, *vals,
                        ";".join(r.undefined)])
        return buf.getvalue()

    def table(self) -> str:
        """Aligned human-readable table."""
        head = ["group", "split", "time", *METRIC_NAMES]
        body = []
        for r in self.rows:
            cells = [r.group, r.split, "" if r.time is None else f"{r.time:g}"]
            for k in METRIC_NAMES:
                v = r.metrics.get(k)
                cells.append("undef" if v is None else f"{v:.4g}")
            body.append(cells)
        return format_table(head, body) + f"\n({self.note}; quantity {self.quantity})"


def format_table(head, body) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(head, *body)]
    line = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(head), sep] + [line(b) for b in body])


def _metrics(h, h_hat) -> tuple[dict, tuple]:
    mre = modified_relative_error(h, h_hat)
    sm = standard_metrics(h, h_hat)
    return {"mean_rel": mre.mean, "std_rel": mre.std, **sm.as_dict()}, sm.undefined


def quantity(problem, fields: dict) -> np.ndarray:
    """|V| for Navier-Stokes problems, u otherwise."""
    if "v" in problem.fields:
        return velocity_magnitude(fields["u"], fields["v"])
    return np.asarray(fields["u"])


def predict_field(model, problem, cond: Condition, axes: dict, seq_len: int, seq_seed: int = 0,
                  chunk: int = 8192) -> ReferenceField:
    """Model prediction on a tensor-product grid."""
    seq = boundary_sequence(problem, cond, seq_len, seq_seed)
    pts = grid_points(axes)
    P = model.params.leaves()
    outs = []
    for i in range(0, len(pts), chunk):
        out = model.apply_tokens(P, pts[i:i + chunk], seq.coords, seq.values)
        outs.append(out.value.data)
    pred = np.concatenate(outs, axis=0)
    shape = tuple(len(a) for a in axes.values())
    vals = {f: pred[:, k].reshape(shape) for k, f in enumerate(problem.fields)}
    return ReferenceField(dict(axes), vals, "model", {"condition": cond.id})


def evaluate_fields(problem, conds, preds: dict, refs: dict, time_slices=None) -> MetricReport:
    """Metrics from precomputed prediction/reference fields keyed by condition id."""
    report = MetricReport(quantity="|V|" if "v" in problem.fields else "u")
    t_ax = problem.coords.index("t") if "t" in problem.coords else None
    per_split: dict = {}
    for c in conds:
        h = quantity(problem, refs[c.id].values)
        hh = quantity(problem, preds[c.id].values)
        m, und = _metrics(h, hh)
        report.rows.append(MetricRow(c.id, c.split, None, m, h.size, und))
        per_split.setdefault(c.split, []).append((c.id, h, hh))
        if time_slices is not None and t_ax is not None:
            ts = refs[c.id].axes["t"]
            for tv in time_slices:
                j = int(np.argmin(np.abs(ts - tv)))
                hs, hhs = np.take(h, j, axis=t_ax), np.take(hh, j, axis=t_ax)
                m, und = _metrics(hs, hhs)
                report.rows.append(MetricRow(c.id, c.split, float(ts[j]), m, hs.size, und))
    for split in ("seen", "unseen"):
        items = per_split.get(split)
        if not items:
            continue
        per_cond = [_metrics(h, hh)[0] for _, h, hh in items]
        agg = {}
        for k in METRIC_NAMES:
            vals = [m[k] for m in per_cond if m[k] is not None]
            agg[k] = float(np.mean(vals)) if vals else None
        pooled = modified_relative_error(np.concatenate([h.ravel() for _, h, _ in items]),
                                         np.concatenate([hh.ravel() for _, _, hh in items]))
        agg["std_rel"] = pooled.std
        report.rows.append(MetricRow(split, split, None, agg, sum(h.size for _, h, _ in items),
                                     tuple(k for k in METRIC_NAMES if agg[k] is None)))
    return report


def evaluate_model(model, problem, conditions, axes: dict | None = None, *, seq_len: int,
                   seq_seed: int = 0, time_slices=None) -> tuple[MetricReport, dict]:
    """Per-condition metrics plus seen/unseen aggregates (mean of per-condition means).

    Returns the report and the predicted fields keyed by condition id.
    """
    axes = axes or problem.eval_axes("desk")
    preds, refs = {}, {}
    for c in conditions:
        refs[c.id] = problem.reference(c, axes)
        preds[c.id] = predict_field(model, problem, c, axes, seq_len, seq_seed)
    return evaluate_fields(problem, conditions, preds, refs, time_slices), preds


def sweep(model, problem, axis: str, values, conditions=None, *, seq_len: int, seq_seed: int = 0,
          axes: dict | None = None, out_path=None) -> np.ndarray:
    """Mean modified relative error along one axis (``time``, ``Re`` or ``lid_velocity``).

    For ``time`` the given conditions are evaluated on the spatial grid at
    each time value and the per-condition means are averaged.  Returns rows
    (value, mean error) and optionally writes them as CSV.
    """
    values = [float(v) for v in values]
    axes = dict(axes or problem.eval_axes("desk"))
    rows = []
    if axis == "time":
        if "t" not in problem.coords:
            raise ValueError(f"problem {problem.name!r} has no time axis")
        for tv in values:
            ax = {**axes, "t": np.array([tv])}
            errs = []
            for c in conditions:
                ref = problem.reference(c, ax)
                pred = predict_field(model, problem, c, ax, seq_len, seq_seed)
                errs.append(modified_relative_error(quantity(problem, ref.values),
                                                    quantity(problem, pred.values)).mean)
            rows.append((tv, float(np.mean(errs))))
    elif axis in ("Re", "lid_velocity"):
        kind = "reynolds" if axis == "Re" else "lid"
        for v in values:
            c = Condition(f"{kind}-{v:g}", kind, {axis: v}, "unseen")
            ref = problem.reference(c, axes)
            pred = predict_field(model, problem, c, axes, seq_len, seq_seed)
            rows.append((v, modified_relative_error(quantity(problem, ref.values),
                                                    quantity(problem, pred.values)).mean))
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([axis, "mean_rel"])
            for a, b in arr:
                w.writerow(["%.17g" % a, "%.17g" % b])
    return arr


def comparison_table(results: dict) -> str:
    """Seen/unseen mean (std) percentages per case and model, shaped like the headline table.

    ``results[model_name][case] = (seen_mean, seen_std, unseen_mean, unseen_std)``.
    """
    models = list(results)
    cases = []
    for m in models:
        for c in results[m]:
            if c not in cases:
                cases.append(c)
    head = ["case"] + [f"{m} {s}" for m in models for s in ("seen", "unseen")]
    body = []
    pct = lambda a, b: "n/a" if a is None or (isinstance(a, float) and math.isnan(a)) else f"{100 * a:.2f}% ({100 * b:.2f}%)"
    for c in cases:
        row = [c]
        for m in models:
            r = results[m].get(c)
            row += [pct(r[0], r[1]), pct(r[2], r[3])] if r else ["n/a", "n/a"]
        body.append(row)
    return format_table(head, body)
