"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic  b"PINTOCKP"
    4 bytes   uint32 format version
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header
    ...       payload: float64 little-endian arrays, back to back

The header holds ``config`` (architecture/experiment echo), ``meta`` (free
scalars such as the epoch) and ``entries``: a list of ``[name, shape,
offset]`` with offsets in bytes from the start of the payload.  Entry names
are ``param/<name>``, ``opt/m/<name>``, ``opt/v/<name>`` or ``extra/<name>``.
Arrays are written in C order, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.params import ParameterStore, order_key

MAGIC = b"PINTOCKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: ParameterStore
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    optimizer: dict | None = None  # {"scalars": {...}, "arrays": {"m/name": arr, ...}}
    extra: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        arrays = [(f"param/{n}", a) for n, a in self.params.items()]
        if self.optimizer is not None:
            for key in sorted(self.optimizer["arrays"], key=order_key):
                arrays.append((f"opt/{key}", self.optimizer["arrays"][key]))
        for key in sorted(self.extra):
            arrays.append((f"extra/{key}", np.asarray(self.extra[key], dtype=np.float64)))
        entries, chunks, off = [], [], 0
        for name, a in arrays:
            raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
            entries.append([name, list(np.shape(a)), off])
            chunks.append(raw)
            off += len(raw)
        header = {"config": self.config, "meta": self.meta, "entries": entries,
                  "optimizer": None if self.optimizer is None else self.optimizer["scalars"]}
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        return MAGIC + struct.pack("<IQ", VERSION, len(hb)) + hb + b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        version, hlen = struct.unpack("<IQ", blob[8:20])
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(blob[20:20 + hlen].decode("utf-8"))
        payload = memoryview(blob)[20 + hlen:]
        params, opt_arrays, extra = {}, {}, {}
        for name, shape, off in header["entries"]:
            n = int(np.prod(shape)) if shape else 1
            a = np.frombuffer(payload[off:off + 8 * n], dtype="<f8").astype(np.float64).reshape(shape)
            kind, key = name.split("/", 1)
            {"param": params, "opt": opt_arrays, "extra": extra}[kind][key] = a
        opt = None
        if header.get("optimizer") is not None:
            opt = {"scalars": header["optimizer"], "arrays": opt_arrays}
        return cls(ParameterStore(params), header["config"], header["meta"], opt, extra)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())
