"""Cross-attention neural operator and the DeepONet baseline.

Shapes used throughout:

* query coordinates ``X``: ``(K, B, d)`` (``K`` conditions, ``B`` points each)
  or ``(B, d)`` for a single condition;
* boundary tokens: coordinates ``(K, L, d)`` and values ``(K, L, v)``, or the
  unbatched ``(L, d)``/``(L, v)``.

Everything runs on :class:`~pinto.autodiff.jet.Jet` objects so the same code
path yields coordinate derivatives (query side only; tokens carry none).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import jet as J
from ..autodiff import tensor as T
from ..autodiff.jet import Jet
from ..autodiff.params import ParameterStore


@dataclass(frozen=True)
class PintoConfig:
    coord_dim: int = 2
    value_dim: int = 1
    out_dim: int = 1
    embed_dim: int = 64
    encoder_layers: int = 2
    heads: int = 2
    n_cau: int = 2
    cau_dense_layers: int = 2
    head_layers: int = 2
    activation: str = "tanh"
    cau_activation: str = "swish"

    def validate(self) -> None:
        for name in ("coord_dim", "value_dim", "out_dim", "embed_dim", "heads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("encoder_layers", "n_cau", "cau_dense_layers", "head_layers"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        J.activation(self.activation)
        J.activation(self.cau_activation)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class DeepOnetConfig:
    coord_dim: int = 2
    branch_inputs: int = 80
    out_dim: int = 1
    width: int = 64
    branch_layers: int = 3
    trunk_layers: int = 3
    latent_dim: int = 64
    activation: str = "tanh"

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and v <= 0:
                raise ValueError(f"{f.name} must be positive")
        J.activation(self.activation)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- initialization -----------------------------------------------------

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _dense_shapes(prefix: str, widths: list[int], bias: bool = True) -> dict[str, tuple]:
    shapes = {}
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        shapes[f"{prefix}.{i}.w"] = (a, b)
        if bias:
            shapes[f"{prefix}.{i}.b"] = (b,)
    return shapes


def _materialize(shapes: dict[str, tuple], seed: int) -> ParameterStore:
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    probe = ParameterStore({n: np.zeros(s) for n, s in shapes.items()})
    # draw in canonical order so the store is independent of dict construction
    for name, arr in probe.items():
        if name.endswith(".b"):
            store.add(name, np.zeros(arr.shape))
        else:
            store.add(name, glorot(rng, arr.shape[0], arr.shape[1]))
    return store


def pinto_param_shapes(cfg: PintoConfig) -> dict[str, tuple]:
    m = cfg.embed_dim
    enc = [m] * cfg.encoder_layers
    shapes = {}
    if cfg.encoder_layers == 0:
        raise ValueError("encoders need at least one layer to lift into the embedding space")
    shapes.update(_dense_shapes("qpe", [cfg.coord_dim] + enc))
    shapes.update(_dense_shapes("bpe", [cfg.coord_dim] + enc))
    shapes.update(_dense_shapes("bve", [cfg.value_dim] + enc))
    for j in range(cfg.n_cau):
        for h in range(cfg.heads):
            for role in ("query", "key", "value"):
                shapes[f"cau.{j}.head.{h}.{role}"] = (m, m)
        shapes[f"cau.{j}.residual.w"] = (m, m)
        shapes[f"cau.{j}.residual.b"] = (m,)
        shapes.update(_dense_shapes(f"cau.{j}.dense", [m] * (cfg.cau_dense_layers + 1)))
    for k in range(cfg.out_dim):
        shapes.update(_dense_shapes(f"out.{k}", [m] * (cfg.head_layers + 1) + [1]))
    return shapes


def init_params(cfg, seed: int) -> ParameterStore:
    """Glorot-uniform weights and zero biases, deterministic in ``seed``."""
    cfg.validate()
    if isinstance(cfg, PintoConfig):
        return _materialize(pinto_param_shapes(cfg), seed)
    if isinstance(cfg, DeepOnetConfig):
        return _materialize(deeponet_param_shapes(cfg), seed)
    raise TypeError(f"unsupported config {type(cfg).__name__}")


# -- building blocks ------------------------------------------------------

def dense_stack(P, prefix: str, x, n_layers: int, act, last_act=None):
    """``n_layers`` affine layers; ``act`` on all but the last, ``last_act`` on the last."""
    for i in range(n_layers):
        x = J.add(J.matmul(x, P[f"{prefix}.{i}.w"]), P[f"{prefix}.{i}.b"])
        f = act if i < n_layers - 1 else (last_act or act)
        x = f(x)
    return x


def attention_scores(query, keys, m: int):
    """Softmax over tokens of <query, key_i>/sqrt(m).

    ``query`` is (..., B, m) (Jet or array); ``keys`` is (..., L, m).
    Returns a Jet with trailing axis L.
    """
    kd = T.data_of(keys) if not isinstance(keys, T.Tensor) else keys.data
    if kd.shape[-2] == 0:
        raise ValueError("attention needs at least one token")
    qd = query.data.data[0] if isinstance(query, Jet) else np.asarray(T.data_of(query))
    if qd.shape[-1] != kd.shape[-1]:
        raise ValueError(f"query dim {qd.shape[-1]} != key dim {kd.shape[-1]}")
    kt = T.swapaxes(T.as_tensor(keys), -1, -2)
    logits = J.mul(J.matmul(J.lift(query), kt), 1.0 / math.sqrt(m))
    return J.softmax(logits)


def attention_logits(query, keys, m: int) -> np.ndarray:
    q, k = np.asarray(query, dtype=float), np.asarray(keys, dtype=float)
    return q @ np.swapaxes(k, -1, -2) / math.sqrt(m)


def cau_forward(P, j: int, mu, keys, values, *, heads: int, m: int, act, dense_layers: int):
    """One cross-attention unit.

    ``mu_next = act(W mu + b + sum_h sum_i zeta_i^h R_h v_i)`` followed by the
    unit's dense block.  ``keys``/``values`` are the shared BPE/BVE embeddings.
    """
    mu = J.lift(mu)
    acc = J.add(J.matmul(mu, P[f"cau.{j}.residual.w"]), P[f"cau.{j}.residual.b"])
    for h in range(heads):
        q = J.matmul(mu, P[f"cau.{j}.head.{h}.query"])
        k = T.matmul(keys, P[f"cau.{j}.head.{h}.key"])
        v = T.matmul(values, P[f"cau.{j}.head.{h}.value"])
        zeta = attention_scores(q, k, m)
        acc = J.add(acc, J.matmul(zeta, v))
    out = act(acc)
    if dense_layers:
        out = dense_stack(P, f"cau.{j}.dense", out, dense_layers, act)
    return out


class PintoModel:
    """Lifting encoders, stacked cross-attention units and per-field heads."""

    def __init__(self, config: PintoConfig, params: ParameterStore | None = None, seed: int = 0):
        config.validate()
        self.config = config
        self.params = params if params is not None else init_params(config, seed)
        missing = set(pinto_param_shapes(config)) ^ set(self.params.names())
        if missing:
            raise ValueError(f"parameter store does not match architecture: {sorted(missing)[:5]}")

    def encode_boundary(self, P, token_x, token_v):
        cfg = self.config
        act = J.activation(cfg.activation)
        tx = np.asarray(token_x, dtype=float)
        tv = np.asarray(token_v, dtype=float)
        if tv.ndim == tx.ndim - 1:
            tv = tv[..., None]
        if tx.shape[-2] == 0:
            raise ValueError("empty boundary sequence")
        if tx.shape[-1] != cfg.coord_dim or tv.shape[-1] != cfg.value_dim:
            raise ValueError(f"token shapes {tx.shape}/{tv.shape} do not match config "
                             f"(d={cfg.coord_dim}, v={cfg.value_dim})")
        keys = dense_stack(P, "bpe", Jet(tx), cfg.encoder_layers, act).value
        vals = dense_stack(P, "bve", Jet(tv), cfg.encoder_layers, act).value
        return keys, vals

    def apply(self, P, X, token_x, token_v) -> Jet:
        """Forward pass on a coordinate jet ``X`` (or plain array)."""
        cfg = self.config
        act = J.activation(cfg.activation)
        cau_act = J.activation(cfg.cau_activation)
        X = X if isinstance(X, Jet) else Jet(np.asarray(X, dtype=float))
        if X.shape[-1] != cfg.coord_dim:
            raise ValueError(f"query coordinate dim {X.shape[-1]} != {cfg.coord_dim}")
        keys, vals = self.encode_boundary(P, token_x, token_v)
        mu = dense_stack(P, "qpe", X, cfg.encoder_layers, act)
        for j in range(cfg.n_cau):
            mu = cau_forward(P, j, mu, keys, vals, heads=cfg.heads, m=cfg.embed_dim,
                             act=cau_act, dense_layers=cfg.cau_dense_layers)
        outs = []
        for k in range(cfg.out_dim):
            outs.append(dense_stack(P, f"out.{k}", mu, cfg.head_layers + 1, act, J.identity))
        return J.concat_last(outs)

    def apply_tokens(self, P, X, token_x, token_v) -> Jet:
        return self.apply(P, X, token_x, token_v)

    def __call__(self, X, token_x, token_v, params=None) -> np.ndarray:
        P = (params or self.params).leaves()
        return self.apply(P, X, token_x, token_v).value.data


def pinto_forward(model: PintoModel, X, boundary, params=None) -> np.ndarray:
    """``G_theta(X, b)`` as a plain array.

    ``boundary`` is a :class:`~pinto.problems.base.BoundarySequence` or a
    ``(token_x, token_v)`` pair.
    """
    tx, tv = _tokens(boundary)
    return model(X, tx, tv, params=params)


def _tokens(boundary):
    if hasattr(boundary, "coords") and hasattr(boundary, "values"):
        return boundary.coords, boundary.values
    tx, tv = boundary
    return tx, tv


# -- DeepONet baseline ---------------------------------------------------------

def deeponet_param_shapes(cfg: DeepOnetConfig) -> dict[str, tuple]:
    p = cfg.latent_dim * cfg.out_dim
    shapes = {}
    shapes.update(_dense_shapes("branch", [cfg.branch_inputs] + [cfg.width] * (cfg.branch_layers - 1) + [p]))
    shapes.update(_dense_shapes("trunk", [cfg.coord_dim] + [cfg.width] * (cfg.trunk_layers - 1) + [p]))
    shapes["merge.b"] = (cfg.out_dim,)
    return shapes


class DeepOnetBaseline:
    """Branch MLP over a fixed-length boundary vector, trunk MLP over the query point.

    One inner product per output field.
    """

    def __init__(self, config: DeepOnetConfig, params: ParameterStore | None = None, seed: int = 0):
        config.validate()
        self.config = config
        self.params = params if params is not None else init_params(config, seed)

    def apply(self, P, X, branch_input) -> Jet:
        cfg = self.config
        act = J.activation(cfg.activation)
        bi = np.asarray(branch_input, dtype=float)
        if bi.shape[-1] != cfg.branch_inputs:
            raise ValueError(f"branch expects {cfg.branch_inputs} inputs, got {bi.shape[-1]} "
                             "(DeepONet cannot take variable-length boundary data)")
        X = X if isinstance(X, Jet) else Jet(np.asarray(X, dtype=float))
        if X.shape[-1] != cfg.coord_dim:
            raise ValueError(f"query coordinate dim {X.shape[-1]} != {cfg.coord_dim}")
        br = dense_stack(P, "branch", Jet(bi), cfg.branch_layers, act, J.identity).value
        tr = dense_stack(P, "trunk", X, cfg.trunk_layers, act)
        p = cfg.latent_dim
        # (..., p*s) branch broadcast against (..., B, p*s) trunk
        br = T.expand_dims(br, -2)
        outs = []
        for k in range(cfg.out_dim):
            bk = br[..., k * p:(k + 1) * p]
            tk = J.take_last(tr, slice(k * p, (k + 1) * p))
            outs.append(J.tsum(J.mul(tk, bk), -1))
        stacked = _stack_last(outs)
        return J.add(stacked, P["merge.b"])

    def apply_tokens(self, P, X, token_x, token_v) -> Jet:
        """Branch input is the token value sequence flattened to (..., L * v)."""
        tv = np.asarray(token_v, dtype=float)
        if tv.ndim == np.ndim(token_x) - 1:
            tv = tv[..., None]
        return self.apply(P, X, tv.reshape(tv.shape[:-2] + (-1,)))

    def __call__(self, X, branch_input, params=None) -> np.ndarray:
        P = (params or self.params).leaves()
        return self.apply(P, X, branch_input).value.data


def _stack_last(jets: list[Jet]) -> Jet:
    return J.concat_last([J.expand_last(j) for j in jets])


def deeponet_forward(model: DeepOnetBaseline, X, boundary_values, params=None) -> np.ndarray:
    return model(X, boundary_values, params=params)


def count_parameters(store: ParameterStore) -> int:
    return store.count()
