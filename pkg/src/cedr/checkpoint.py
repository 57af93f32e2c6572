"""Binary checkpoint format for named parameter tensors.

Layout (little-endian):
    magic   b"CEDR"
    version u16
    then per tensor until EOF:
        name_len u16, name utf-8, ndim u16, dims u32 each, values f64
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Parameter

MAGIC = b"CEDR"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: list[Parameter]):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<H", len(name)))
            f.write(name)
            f.write(struct.pack("<H", p.values.ndim))
            for d in p.values.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(p.values, dtype="<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic at offset 0: {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} at offset 4")
    tensors: dict[str, np.ndarray] = {}
    off = 6
    while off < len(data):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<H", data, off)
        off += 2
        dims = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        n = int(np.prod(dims)) if ndim else 1
        vals = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        tensors[name] = vals.astype(np.float64)
    return tensors
