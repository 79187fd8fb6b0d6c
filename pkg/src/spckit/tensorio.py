"""PFT1 tensor files.

A minimal binary container for float32 tensors:

======  ========================================
offset  contents
======  ========================================
0       magic ``b"PFT1"``
4       dtype code, uint8 (0 = float32 LE)
5       ndim, uint8
6       ndim x uint32 LE dimensions
...     payload, C order
======  ========================================

An optional JSON sidecar lives next to the tensor at ``<path>.json``.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

__all__ = ["write_tensor", "read_tensor", "read_sidecar", "sidecar_path"]

MAGIC = b"PFT1"
_DTYPE_FLOAT32 = 0
_MAX_NDIM = 8


def sidecar_path(path) -> str:
    return os.fspath(path) + ".json"


def write_tensor(path, array, sidecar: dict | None = None):
    """Write a tensor (cast to float32) and an optional JSON sidecar."""
    array = np.ascontiguousarray(array, dtype="<f4")
    if array.ndim < 1 or array.ndim > _MAX_NDIM:
        raise ValueError(f"ndim must be in [1, {_MAX_NDIM}]")
    header = MAGIC + struct.pack("<BB", _DTYPE_FLOAT32, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(array.tobytes(order="C"))
    if sidecar is not None:
        with open(sidecar_path(path), "w") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")


def read_tensor(path) -> np.ndarray:
    """Read a PFT1 tensor as a float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 6 or blob[:4] != MAGIC:
        raise ValueError(f"not a PFT1 tensor: {path}")
    dtype_code, ndim = struct.unpack_from("<BB", blob, 4)
    if dtype_code != _DTYPE_FLOAT32:
        raise ValueError(f"unsupported dtype code {dtype_code}: {path}")
    if not (1 <= ndim <= _MAX_NDIM):
        raise ValueError(f"bad ndim {ndim}: {path}")
    offset = 6 + 4 * ndim
    if len(blob) < offset:
        raise ValueError(f"truncated PFT1 header: {path}")
    shape = struct.unpack_from(f"<{ndim}I", blob, 6)
    count = int(np.prod(shape, dtype=np.int64))
    expected = offset + 4 * count
    if len(blob) != expected:
        raise ValueError(
            f"PFT1 payload length {len(blob) - offset} does not match "
            f"shape {shape}: {path}")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(shape).astype(np.float32, copy=True)


def read_sidecar(path) -> dict | None:
    """Read the JSON sidecar of a tensor, if present."""
    sp = sidecar_path(path)
    if not os.path.exists(sp):
        return None
    with open(sp) as fh:
        return json.load(fh)
