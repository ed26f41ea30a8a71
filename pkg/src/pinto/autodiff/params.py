"""Named parameter arrays with a deterministic ordering."""

from __future__ import annotations

import re
from typing import Callable, Iterator, Mapping

import numpy as np

from .tensor import Tape, Tensor, backward, leaves


class UndeclaredParameterError(KeyError):
    pass


def order_key(name: str) -> tuple:
    """Sort key for dotted names: numeric segments compare as integers."""
    key = []
    for part in name.split("."):
        if re.fullmatch(r"\d+", part):
            key.append((0, int(part), ""))
        else:
            key.append((1, 0, part))
    return tuple(key)


class ParameterStore:
    """Mapping of dotted names (``module.layer.role``) to float64 arrays.

    Iteration order is lexicographic in (module path, layer index, tensor role),
    independent of insertion order.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None):
        self._arrays: dict[str, np.ndarray] = {}
        for name, value in (arrays or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> None:
        if name in self._arrays:
            raise ValueError(f"duplicate parameter {name!r}")
        self._arrays[name] = np.array(value, dtype=np.float64)

    def names(self) -> list[str]:
        return sorted(self._arrays, key=order_key)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self._arrays[name]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._arrays[name]
        except KeyError:
            raise UndeclaredParameterError(name) from None

    def __setitem__(self, name: str, value) -> None:
        if name not in self._arrays:
            raise UndeclaredParameterError(name)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._arrays[name].shape:
            raise ValueError(f"shape change for {name!r}: {self._arrays[name].shape} -> {value.shape}")
        self._arrays[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterStore) or self.names() != other.names():
            return False
        return all(np.array_equal(a, other[n]) for n, a in self.items())

    def count(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))

    def shapes(self) -> dict[str, tuple]:
        return {n: a.shape for n, a in self.items()}

    def copy(self) -> "ParameterStore":
        return ParameterStore({n: a.copy() for n, a in self.items()})

    def flat(self) -> np.ndarray:
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([a.ravel() for _, a in self.items()])

    def with_flat(self, vec: np.ndarray) -> "ParameterStore":
        out, i = {}, 0
        for name, a in self.items():
            out[name] = np.asarray(vec[i:i + a.size]).reshape(a.shape).copy()
            i += a.size
        if i != len(vec):
            raise ValueError(f"flat vector has {len(vec)} entries, store needs {i}")
        return ParameterStore(out)

    def leaves(self, tape: Tape | None = None) -> "ParamView":
        return ParamView(leaves(self.items(), tape))


class ParamView(dict):
    """Name -> Tensor mapping handed to model code; unknown names are an error."""

    def __missing__(self, name):
        raise UndeclaredParameterError(f"program references undeclared parameter {name!r}")


class Program:
    """A differentiable computation ``fn(params, x) -> Tensor``.

    ``input_shape`` (optional) pins the trailing shape of accepted inputs.
    """

    def __init__(self, fn: Callable, input_shape: tuple | None = None):
        self.fn = fn
        self.input_shape = input_shape

    def __call__(self, params, x):
        return self.fn(params, x)


def _check_input(program, x: np.ndarray) -> None:
    want = getattr(program, "input_shape", None)
    if want is not None and tuple(x.shape[-len(want):] if want else ()) != tuple(want):
        from .tensor import ShapeError

        raise ShapeError(f"program expects trailing input shape {want}, got {x.shape}")


def evaluate(program, params: ParameterStore, inputs) -> np.ndarray:
    """Untaped evaluation."""
    x = np.asarray(inputs, dtype=np.float64)
    _check_input(program, x)
    out = program(params.leaves(None), Tensor(x))
    return np.asarray(out.data if isinstance(out, Tensor) else out, dtype=np.float64)


def record_forward(program, params: ParameterStore, inputs) -> tuple[np.ndarray, Tape]:
    x = np.asarray(inputs, dtype=np.float64)
    _check_input(program, x)
    with Tape() as tape:
        out = program(params.leaves(tape), Tensor(x))
    out = out if isinstance(out, Tensor) else Tensor(out)
    tape.output = out
    return out.data, tape


def value_and_grad(fn: Callable[[ParamView], Tensor], params: ParameterStore):
    """Evaluate a scalar ``fn(params)`` and its gradient for every parameter."""
    with Tape() as tape:
        out = fn(params.leaves(tape))
    tape.output = out
    return float(out.data), backward(tape)
