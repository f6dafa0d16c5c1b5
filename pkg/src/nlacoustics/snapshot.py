"""Binary snapshot files for fields.

Layout (little-endian throughout):

    magic   4 bytes  b"NLAC"
    version u32      1
    naxes   u8
    per axis: kind u8 (0 periodic, 1 bounded), points u64, extent f64
    stamp   f64      march/time position of the frame
    payload f64 * prod(points), row-major over the axes

Axis labels and roles are not part of the format; readers get fresh
default labels.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grids import BOUNDED, PERIODIC, AxisSpec, Field, GridSpec, make_grid

MAGIC = b"NLAC"
VERSION = 1

_KIND_CODE = {PERIODIC: 0, BOUNDED: 1}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def write_snapshot(path: str | Path, f: Field, stamp: float = 0.0) -> None:
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<B", grid.ndim))
        for ax in grid.axes:
            fh.write(struct.pack("<BQd", _KIND_CODE[ax.kind], ax.points, ax.extent))
        fh.write(struct.pack("<d", float(stamp)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValidationError(f"{path}: not a snapshot file (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValidationError(f"{path}: unsupported snapshot version {version}")
        (naxes,) = struct.unpack("<B", fh.read(1))
        axes = []
        for i in range(naxes):
            code, points, extent = struct.unpack("<BQd", fh.read(17))
            if code not in _CODE_KIND:
                raise ValidationError(f"{path}: unknown axis kind code {code}")
            axes.append(AxisSpec(f"ax{i}", _CODE_KIND[code], extent, int(points)))
        (stamp,) = struct.unpack("<d", fh.read(8))
        shape = tuple(a.points for a in axes)
        count = int(np.prod(shape))
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise ValidationError(f"{path}: truncated payload")
        values = np.frombuffer(payload, dtype="<f8").reshape(shape)
    grid = make_grid(GridSpec(tuple(axes)))
    return Field(grid, values.astype(np.float64)), stamp
