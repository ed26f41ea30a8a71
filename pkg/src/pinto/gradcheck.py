"""Derivative self-test: analytic paths against finite differences.

Every jet primitive is exercised in a small program whose reverse-mode
parameter gradient and coordinate derivatives are compared with central
differences; a tiny PINTO model then checks the full physics loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import jet as J
from .autodiff.fd import central_gradient, derivatives_1d, relative_error
from .autodiff.params import ParameterStore, value_and_grad
from .autodiff.tensor import Tensor, tsum

TOLERANCE = 1e-5
# fourth-order stencil; 1e-3 balances truncation against roundoff for d2
FD_STEP = 1e-3


@dataclass
class GradcheckReport:
    rows: dict = field(default_factory=dict)  # primitive -> {"reverse": err, "jet_d1": err, "jet_d2": err}
    tolerance: float = TOLERANCE

    @property
    def worst(self) -> float:
        return max((v for r in self.rows.values() for v in r.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst)) and self.worst < self.tolerance

    def table(self) -> str:
        lines = [f"{'primitive':<14}{'reverse':>12}{'jet d1':>12}{'jet d2':>12}"]
        for name, r in self.rows.items():
            cells = "".join(f"{r[k]:>12.2e}" if k in r else f"{'-':>12}" for k in ("reverse", "jet_d1", "jet_d2"))
            lines.append(f"{name:<14}{cells}")
        lines.append(f"worst {self.worst:.2e} (tolerance {self.tolerance:g}): {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _primitive_program(kind: str):
    if kind in J.DERIVS:
        return lambda x: J.pointwise(x, kind)
    return {
        "mul": lambda x: J.mul(x, x),
        "div": lambda x: J.div(J.tanh(x), J.add(J.mul(x, x), 1.5)),
        "softmax": J.softmax,
    }[kind]


PRIMITIVES = tuple(J.DERIVS) + ("mul", "div", "softmax")


def _shift(kind: str) -> float:
    # keep the reciprocal away from its pole
    return 2.5 if kind == "reciprocal" else 0.0


def check_primitive(kind: str, rng: np.random.Generator, n: int = 4, width: int = 3) -> dict:
    f = _primitive_program(kind)
    shift = _shift(kind)
    W0 = rng.uniform(-1, 1, (2, width)) * (0.3 if shift else 1.0)
    pts = rng.uniform(-1, 1, (n, 2))
    params = ParameterStore({"w": W0})

    def program(P, X):
        return f(J.add(J.matmul(X, P["w"]), shift))

    xj = J.seed(pts, [0, 1])
    C = rng.uniform(-1, 1, xj.data.shape[:-1] + (width,))

    def scalar(P):
        out = program(P, xj)
        return tsum(out.data * C)

    _, grads = value_and_grad(scalar, params)
    fd = central_gradient(lambda w: float(np.sum(program({"w": Tensor(w)}, xj).data.data * C)), W0)
    row = {"reverse": relative_error(grads["w"], fd)}
    wt = {"w": Tensor(W0)}
    d1e, d2e = 0.0, 0.0
    for k in (0, 1):
        jets = J.eval_with_coordinate_jets(lambda x: program(wt, x), pts, [k])
        _, d1, d2 = jets[0]

        def along(h, k=k):
            p = pts.copy()
            p[:, k] += h
            return program(wt, J.Jet(p)).value.data

        f1, f2 = derivatives_1d(along, 0.0, eps=FD_STEP)
        d1e = max(d1e, relative_error(d1, f1))
        d2e = max(d2e, relative_error(d2, f2))
    row["jet_d1"] = d1e
    row["jet_d2"] = d2e
    return row


def tiny_pinto_config(size: int = 2):
    from .nn.model import PintoConfig

    return PintoConfig(coord_dim=2, value_dim=1, out_dim=1, embed_dim=size, encoder_layers=1, heads=1,
                       n_cau=1, cau_dense_layers=0, head_layers=0, activation="tanh", cau_activation="swish")


def check_physics_loss(size: int, seed: int, problem_name: str = "advection") -> dict:
    """Reverse-mode gradient of the physics loss on a tiny model vs central differences."""
    from .nn.model import PintoConfig, PintoModel
    from .problems.base import boundary_sequence, get_problem, sample_collocation
    from .training.loss import physics_loss

    problem = get_problem(problem_name)
    base = tiny_pinto_config(size)
    cfg = PintoConfig(**{**base.__dict__, "coord_dim": problem.d, "value_dim": problem.value_dim,
                         "out_dim": problem.s})
    model = PintoModel(cfg, seed=seed)
    fam = problem.family(seed=seed) if problem.family_kind not in ("sinusoidal", "grf") else \
        problem.family(seed=seed, n_seen=2, n_unseen=1)
    conds = fam.seen()[:2]
    seqs = [boundary_sequence(problem, c, 6, seed) for c in conds]
    batch = sample_collocation(problem, 8, 6, seed)
    names = list(model.params.names())

    def loss_of(P):
        return physics_loss(model, P, problem, batch, seqs, conds)[0]

    _, grads = value_and_grad(loss_of, model.params)
    flat0 = model.params.flat()

    def f(flat):
        return float(loss_of(model.params.with_flat(flat).leaves()).data)

    fd = central_gradient(f, flat0)
    an = np.concatenate([grads[n].ravel() for n in names])
    return {"reverse": relative_error(an, fd), "n_params": int(flat0.size)}


def run_gradcheck(size: int = 2, seed: int = 0, tolerance: float = TOLERANCE,
                  problems=("advection",)) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    report = GradcheckReport(tolerance=tolerance)
    for kind in PRIMITIVES:
        report.rows[kind] = check_primitive(kind, rng)
    for name in problems:
        r = check_physics_loss(size, seed, name)
        report.rows[f"loss:{name}"] = {"reverse": r["reverse"]}
    return report
