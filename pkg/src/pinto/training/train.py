"""Experiment description and the optimisation loop."""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.params import ParameterStore, value_and_grad
from ..nn.model import DeepOnetBaseline, DeepOnetConfig, PintoConfig, PintoModel
from ..problems.base import CollocationSet, boundary_sequence, get_problem, grid_points, sample_collocation
from .checkpoint import Checkpoint
from .loss import LossWeights, boundary_data, data_loss, physics_loss
from .optim import OptimizerState, Schedule, optimizer_step

HISTORY_COLUMNS = ("epoch", "total_loss", "physics_term", "boundary_term", "lr")


class DivergenceError(RuntimeError):
    def __init__(self, msg: str, checkpoint: Checkpoint | None, epoch: int):
        super().__init__(msg)
        self.checkpoint = checkpoint
        self.epoch = epoch


@dataclass
class TrainConfig:
    problem: str = "advection"
    problem_params: dict = field(default_factory=dict)
    model: str = "pinto"
    arch: dict = field(default_factory=dict)
    family: dict = field(default_factory=dict)
    n_seen: int = 8
    n_unseen: int = 2
    n_collocation: int = 500
    n_boundary: int = 100
    seq_len: int = 40
    epochs: int = 100
    batches: int = 5
    optimizer: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 0.004
    schedule: str = "constant"
    decay_rate: float = 0.9
    decay_steps: int = 10000
    boundaries: tuple = ()
    values: tuple = ()
    lambda_physics: float = 1.0
    lambda_boundary: float = 1.0
    zero_value_weight: float | None = None
    init_seed: int = 0
    sampling_seed: int = 0
    condition_seed: int = 0
    mode: str = "physics-informed"
    checkpoint_fraction: float = 0.1

    def __post_init__(self):
        self.boundaries = tuple(int(b) for b in self.boundaries)
        self.values = tuple(float(v) for v in self.values)

    def validate(self) -> None:
        get_problem(self.problem, **self.problem_params)
        if self.model not in ("pinto", "deeponet"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.mode not in ("physics-informed", "physics-guided"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("n_collocation", "n_boundary", "seq_len", "epochs", "batches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.batches > min(self.n_collocation, self.n_boundary):
            raise ValueError("more batches than points")
        self.schedule_obj()
        LossWeights(self.lambda_physics, self.lambda_boundary)
        build_model(self)

    def schedule_obj(self) -> Schedule:
        return Schedule(self.schedule, self.lr, self.decay_rate, self.decay_steps, self.boundaries, self.values)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["boundaries"] = list(self.boundaries)
        d["values"] = list(self.values)
        return d

    def resolved(self) -> "TrainConfig":
        """Copy with every architecture field spelled out (a fixed point of the config echo)."""
        return dataclasses.replace(self, arch=dataclasses.asdict(build_model(self).config))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# -- assembly ----------------------------------------------------------------------


def build_model(cfg: TrainConfig, params: ParameterStore | None = None):
    problem = get_problem(cfg.problem, **cfg.problem_params)
    if cfg.model == "pinto":
        arch = PintoConfig(**{**dict(coord_dim=problem.d, value_dim=problem.value_dim, out_dim=problem.s),
                              **cfg.arch})
        if (arch.coord_dim, arch.value_dim, arch.out_dim) != (problem.d, problem.value_dim, problem.s):
            raise ValueError("architecture dimensions do not match the problem")
        return PintoModel(arch, params, seed=cfg.init_seed)
    arch = DeepOnetConfig(**{**dict(coord_dim=problem.d, out_dim=problem.s,
                                    branch_inputs=cfg.seq_len * problem.value_dim), **cfg.arch})
    if arch.branch_inputs != cfg.seq_len * problem.value_dim:
        raise ValueError("DeepONet branch size must equal seq_len * value_dim")
    return DeepOnetBaseline(arch, params, seed=cfg.init_seed)


def conditions_for(cfg: TrainConfig):
    problem = get_problem(cfg.problem, **cfg.problem_params)
    kw = dict(seed=cfg.condition_seed, n_unseen=cfg.n_unseen)
    if problem.family_kind in ("sinusoidal", "grf"):
        kw["n_seen"] = cfg.n_seen
    kw.update(cfg.family)
    for key in ("seen_values", "unseen_values"):
        if key in kw:
            kw[key] = tuple(float(v) for v in kw[key])
    return problem, problem.family(**kw)


@dataclass
class Experiment:
    """Everything derived deterministically from a TrainConfig."""

    cfg: TrainConfig
    problem: object
    family: object
    conds: list
    seqs: list
    colloc: CollocationSet
    targets: tuple

    @classmethod
    def build(cls, cfg: TrainConfig) -> "Experiment":
        problem, family = conditions_for(cfg)
        conds = family.seen()
        if not conds:
            raise ValueError("no training conditions")
        seqs = [boundary_sequence(problem, c, cfg.seq_len, cfg.sampling_seed) for c in conds]
        colloc = sample_collocation(problem, cfg.n_collocation, cfg.n_boundary, cfg.sampling_seed)
        weights = loss_weights(cfg)
        targets = boundary_data(problem, conds, colloc.boundary, weights)
        return cls(cfg, problem, family, conds, seqs, colloc, targets)


def loss_weights(cfg: TrainConfig) -> LossWeights:
    over = {} if cfg.zero_value_weight is None else {"zero_value": cfg.zero_value_weight}
    return LossWeights(cfg.lambda_physics, cfg.lambda_boundary, over)


def epoch_batches(exp: Experiment, epoch: int):
    """Fixed point set, batch assignment reshuffled every epoch."""
    cfg = exp.cfg
    rng = np.random.default_rng([cfg.sampling_seed, 1, epoch])
    c = exp.colloc
    pi = np.array_split(rng.permutation(len(c.interior)), cfg.batches)
    pb = np.array_split(rng.permutation(len(c.boundary)), cfg.batches)
    pp = np.array_split(rng.permutation(len(c.pairs)), cfg.batches)
    tg, wt = exp.targets
    for a, b, p in zip(pi, pb, pp):
        batch = CollocationSet(c.interior[a], c.boundary[b], c.pairs[p] if len(c.pairs) else c.pairs)
        yield batch, (tg[:, b], wt[:, b])


def _guided_data(exp: Experiment):
    """Reference values on the desk evaluation grid, for physics-guided training."""
    axes = exp.problem.eval_axes("desk")
    pts = grid_points(axes)
    vals = []
    for c in exp.conds:
        ref = exp.problem.reference(c, axes)
        vals.append(np.stack([ref.flat(f) for f in exp.problem.fields if f in ref.values], -1))
    return pts, np.stack(vals)


# -- history --------------------------------------------------------------------------


def write_history(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in rows:
            w.writerow([int(r[0])] + ["%.17g" % v for v in r[1:]])


def read_history(path) -> np.ndarray:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(HISTORY_COLUMNS))


# -- training loop ----------------------------------------------------------------------


def _snapshot(cfg, params, state, epoch, history) -> Checkpoint:
    return Checkpoint(params.copy(), {"train": cfg.to_dict()}, {"epoch": epoch},
                      {"scalars": state.scalars(), "arrays": {k: v.copy() for k, v in state.arrays().items()}},
                      {"history": np.array(history, dtype=float).reshape(-1, len(HISTORY_COLUMNS))})


def checkpoint_epochs(cfg: TrainConfig) -> set:
    step = max(1, int(round(cfg.epochs * cfg.checkpoint_fraction)))
    return set(range(step, cfg.epochs + 1, step)) | {cfg.epochs}


def train(cfg: TrainConfig, out_dir=None, resume: Checkpoint | None = None, log=None,
          stop_after: int | None = None) -> tuple[Checkpoint, np.ndarray]:
    """Run the optimisation; returns the final checkpoint and the history array.

    ``stop_after`` ends the run early after that many epochs (same trajectory).
    """
    cfg.validate()
    exp = Experiment.build(cfg)
    model = build_model(cfg)
    weights = loss_weights(cfg)
    sched = cfg.schedule_obj()
    out = Path(out_dir) if out_dir is not None else None
    if resume is not None:
        params = resume.params.copy()
        state = OptimizerState.restore(resume.optimizer["scalars"], resume.optimizer["arrays"])
        start = int(resume.meta["epoch"])
        history = [tuple(r) for r in resume.extra.get("history", np.zeros((0, 5)))]
    else:
        params = model.params
        kind = cfg.optimizer
        state = OptimizerState.for_params(params, kind, weight_decay=cfg.weight_decay if kind == "adamw" else 0.0)
        start, history = 0, []
    state.check(params)
    guided = _guided_data(exp) if cfg.mode == "physics-guided" else None
    ck_at = checkpoint_epochs(cfg)
    last_good = _snapshot(cfg, params, state, start, history)
    end = cfg.epochs if stop_after is None else min(cfg.epochs, start + stop_after)
    t0 = time.time()
    for epoch in range(start + 1, end + 1):
        sums = np.zeros(3)
        nb = 0
        lr = sched(state.step)
        for batch, tg in epoch_batches(exp, epoch):
            lr = sched(state.step)
            if guided is None:
                holder = {}

                def objective(P, batch=batch, tg=tg, holder=holder):
                    total, bd = physics_loss(model, P, exp.problem, batch, exp.seqs, exp.conds, weights, tg)
                    holder["bd"] = bd
                    return total

                val, grads = value_and_grad(objective, params)
                bd = holder["bd"]
                sums += (val, bd.physics_term, bd.boundary_term)
            else:
                val, grads = value_and_grad(lambda P: data_loss(model, P, guided[0], exp.seqs, guided[1]), params)
                sums += (val, val, 0.0)
            if not math.isfinite(val) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                if out is not None:
                    last_good.save(out / "last_good.ckpt")
                    write_history(out / "history.csv", history)
                raise DivergenceError(f"loss diverged at epoch {epoch} (value {val})", last_good, epoch)
            params = optimizer_step(params, grads, state, lr)
            nb += 1
        row = (epoch, *(sums / nb), lr)
        history.append(row)
        if log is not None:
            log(epoch, row, time.time() - t0)
        if epoch in ck_at:
            last_good = _snapshot(cfg, params, state, epoch, history)
            if out is not None:
                last_good.save(out / f"epoch_{epoch:06d}.ckpt")
    final = _snapshot(cfg, params, state, end, history)
    hist = np.array(history, dtype=float).reshape(-1, len(HISTORY_COLUMNS))
    if out is not None:
        final.save(out / "final.ckpt")
        write_history(out / "history.csv", history)
    return final, hist


def model_from_checkpoint(ck: Checkpoint):
    cfg = TrainConfig.from_dict(ck.config["train"])
    return cfg, build_model(cfg, ck.params)
