"""Binary checkpoint files.

Layout (little-endian): the 7-byte magic ``b"IBNLS1\\0"``, ``u32 N``,
``u32 M``, ``f64 L``, ``f64 t``, ``f64 dt``, then ``M**N`` complex values as
interleaved ``f64`` pairs ``(re, im)`` in C order.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .grid import ComplexField, GridSpec, build_grid

MAGIC = b"IBNLS1\0"
_HEADER = struct.Struct("<IIddd")


class Checkpoint(NamedTuple):
    u: ComplexField
    t: float
    dt: float


def save_checkpoint(path, u: ComplexField, t: float, dt: float) -> None:
    g = u.grid
    vals = np.ascontiguousarray(u.physical().values, dtype="<c16")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(g.N, g.M, g.L, float(t), float(dt)))
        fh.write(vals.tobytes())
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        N, M, L, t, dt = _HEADER.unpack(fh.read(_HEADER.size))
        count = M ** N
        data = np.frombuffer(fh.read(16 * count), dtype="<c16")
        if data.size != count:
            raise ValueError(f"{path}: truncated payload ({data.size} of {count} values)")
    grid = build_grid(GridSpec(N, M, L))
    return Checkpoint(ComplexField(grid, data.reshape(grid.shape).astype(complex)), t, dt)
