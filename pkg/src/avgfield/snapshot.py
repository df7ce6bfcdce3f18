"""AFLD field snapshots.

Layout (little endian): ``b"AFLD"``, u32 version (1), u32 nx, u32 ny, f64
origin x, origin y, spacing x, spacing y, u8 bc tag, then ``nx * ny``
interleaved f64 ``(re, im)`` pairs.  Values are written in C order of the
``(nx, ny)`` array, so ``j`` (the y index) varies fastest.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import ConfigurationError
from .grid import BC, ComplexField, Grid2D

MAGIC = b"AFLD"
VERSION = 1
_HEADER = struct.Struct("<4sIII4dB")


def encode(u: ComplexField) -> bytes:
    g = u.grid
    head = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.origin[0], g.origin[1],
                        g.spacing[0], g.spacing[1], int(g.bc))
    body = np.ascontiguousarray(u.values, dtype="<c16").tobytes()
    return head + body


def decode(data: bytes) -> ComplexField:
    if len(data) < _HEADER.size:
        raise ConfigurationError("snapshot is truncated", key="field")
    magic, version, nx, ny, ox, oy, hx, hy, tag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigurationError(f"bad snapshot magic {magic!r}", key="field")
    if version != VERSION:
        raise ConfigurationError(f"unsupported snapshot version {version}", key="field")
    try:
        bc = BC(tag)
    except ValueError:
        raise ConfigurationError(f"unknown bc tag {tag}", key="field") from None
    need = _HEADER.size + 16 * nx * ny
    if len(data) != need:
        raise ConfigurationError(f"snapshot has {len(data)} bytes, expected {need}", key="field")
    vals = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(nx, ny)
    return ComplexField(Grid2D((ox, oy), (hx, hy), (nx, ny), bc), vals.astype(complex))


def save_field(u: ComplexField, path) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(encode(u))
    os.replace(tmp, path)


def load_field(path) -> ComplexField:
    with open(os.fspath(path), "rb") as fh:
        return decode(fh.read())
