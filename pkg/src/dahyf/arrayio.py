"""Binary serialization for dense float64 arrays.

Two little-endian container formats, each a fixed header followed by
row-major float64 payload:

* direction maps: magic ``DMAP``, u32 version, u32 width, u32 height,
  u32 channels, payload of channels * height * width values (channel-major);
* coordinate arrays (codec targets or logits): magic ``CARR``, u32 version,
  u32 n_joints, u32 n_axes, u32 n_bins, payload of n_joints * n_axes * n_bins
  values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import DirectionMap

_DMAP_MAGIC = b"DMAP"
_CARR_MAGIC = b"CARR"
BIN_FORMAT_VERSION = 1


class BinaryFormatError(ValueError):
    """Raised when a binary array file is malformed."""


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise BinaryFormatError("unexpected end of file")
    return data


def write_direction_map(dmap: DirectionMap, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_DMAP_MAGIC)
        fh.write(struct.pack("<IIII", BIN_FORMAT_VERSION, dmap.width, dmap.height, dmap.channels))
        fh.write(np.ascontiguousarray(dmap.values, dtype="<f8").tobytes())


def read_direction_map(path: str | Path) -> DirectionMap:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _DMAP_MAGIC:
            raise BinaryFormatError("not a direction-map file")
        version, width, height, channels = struct.unpack("<IIII", _read_exact(fh, 16))
        if version != BIN_FORMAT_VERSION:
            raise BinaryFormatError(f"unsupported format version {version}")
        payload = _read_exact(fh, 8 * width * height * channels)
        values = np.frombuffer(payload, dtype="<f8").reshape(channels, height, width)
    return DirectionMap(values.copy())


def write_coord_array(arr: np.ndarray, path: str | Path) -> None:
    """Write a (n_joints, n_axes, n_bins) codec target/logit array."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"expected (n_joints, n_axes, n_bins), got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_CARR_MAGIC)
        fh.write(struct.pack("<IIII", BIN_FORMAT_VERSION, a.shape[0], a.shape[1], a.shape[2]))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_coord_array(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _CARR_MAGIC:
            raise BinaryFormatError("not a coordinate-array file")
        version, n_joints, n_axes, n_bins = struct.unpack("<IIII", _read_exact(fh, 16))
        if version != BIN_FORMAT_VERSION:
            raise BinaryFormatError(f"unsupported format version {version}")
        payload = _read_exact(fh, 8 * n_joints * n_axes * n_bins)
        return np.frombuffer(payload, dtype="<f8").reshape(n_joints, n_axes, n_bins).copy()
