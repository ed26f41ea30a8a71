"""Adam / AdamW and learning-rate schedules."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.params import ParameterStore


@dataclass
class OptimizerState:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer {self.kind!r}")

    @classmethod
    def for_params(cls, params: ParameterStore, kind: str = "adam", **kw) -> "OptimizerState":
        st = cls(kind=kind, **kw)
        for name, a in params.items():
            st.m[name] = np.zeros_like(a)
            st.v[name] = np.zeros_like(a)
        return st

    def check(self, params: ParameterStore) -> None:
        for name, a in params.items():
            if self.m[name].shape != a.shape or self.v[name].shape != a.shape:
                raise ValueError(f"optimizer moments for {name!r} do not match parameter shape {a.shape}")

    def arrays(self) -> dict:
        out = {}
        for name in self.m:
            out[f"m/{name}"] = self.m[name]
            out[f"v/{name}"] = self.v[name]
        return out

    def scalars(self) -> dict:
        return {"kind": self.kind, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "weight_decay": self.weight_decay, "step": self.step}

    @classmethod
    def restore(cls, scalars: dict, arrays: dict) -> "OptimizerState":
        st = cls(**scalars)
        for key, a in arrays.items():
            kind, name = key.split("/", 1)
            (st.m if kind == "m" else st.v)[name] = np.array(a)
        return st


def optimizer_step(params: ParameterStore, grads: dict, state: OptimizerState, lr: float) -> ParameterStore:
    """One bias-corrected Adam update; AdamW also applies ``p -= lr * wd * p``.

    Moments in ``state`` are updated in place; a new store is returned.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    out = {}
    for name, p in params.items():
        g = grads[name]
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        upd = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.kind == "adamw" and state.weight_decay:
            upd = upd + state.weight_decay * p
        out[name] = p - lr * upd
    return ParameterStore(out)


@dataclass(frozen=True)
class Schedule:
    """Learning rate as a function of the optimizer step count.

    ``constant``: base.  ``exponential``: base * rate**(step / steps).
    ``piecewise``: values[i] on boundaries[i-1] <= step < boundaries[i].
    """

    kind: str = "constant"
    base: float = 1e-3
    rate: float = 0.9
    steps: int = 10000
    boundaries: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "exponential", "piecewise"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "piecewise":
            if len(self.values) != len(self.boundaries) + 1:
                raise ValueError("piecewise schedule needs len(values) == len(boundaries) + 1")
            if list(self.boundaries) != sorted(self.boundaries):
                raise ValueError("piecewise boundaries must be increasing")
            if min(self.values) <= 0:
                raise ValueError("learning rates must be positive")
        elif self.base <= 0:
            raise ValueError("learning rate must be positive")
        if self.kind == "exponential" and (self.rate <= 0 or self.steps <= 0):
            raise ValueError("exponential decay needs rate > 0 and steps > 0")

    def __call__(self, step: int) -> float:
        if self.kind == "constant":
            return self.base
        if self.kind == "exponential":
            return self.base * self.rate ** (step / self.steps)
        return float(self.values[bisect.bisect_right(self.boundaries, step)])

    def describe(self) -> str:
        if self.kind == "exponential":
            return f"exponential(base={self.base:g}, rate={self.rate:g}, steps={self.steps})"
        if self.kind == "piecewise":
            return f"piecewise(boundaries={list(self.boundaries)}, values={list(self.values)})"
        return f"constant({self.base:g})"
