"""Point cloud file readers/writers and the length-prefixed frame file.

A ``.rcpcc`` file is a sequence of frames, each preceded by a u32
little-endian byte length.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import CorruptStream

__all__ = [
    "read_velodyne_bin",
    "write_velodyne_bin",
    "read_xyz",
    "write_xyz",
    "load_cloud",
    "write_frames",
    "read_frames",
]


def read_velodyne_bin(path) -> np.ndarray:
    """Read a KITTI velodyne scan: little-endian float32 (x, y, z, intensity).

    Returns an (N, 4) float32 array.  The file length must be a multiple
    of 16 bytes.
    """
    data = Path(path).read_bytes()
    if len(data) % 16 != 0:
        raise ValueError(f"{path}: length {len(data)} not divisible by 16")
    return np.frombuffer(data, dtype="<f4").reshape(-1, 4)


def write_velodyne_bin(path, cloud: np.ndarray) -> None:
    cloud = np.asarray(cloud)
    if cloud.ndim != 2 or cloud.shape[1] not in (3, 4):
        raise ValueError("cloud must be (N, 3) or (N, 4)")
    if cloud.shape[1] == 3:
        cloud = np.column_stack((cloud, np.zeros(len(cloud))))
    Path(path).write_bytes(cloud.astype("<f4").tobytes())


def read_xyz(path) -> np.ndarray:
    """Read a plain-text point cloud, one whitespace-separated point per line."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # empty file is valid
        pts = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if pts.size == 0:
        return np.zeros((0, 3))
    if pts.shape[1] < 3:
        raise ValueError(f"{path}: expected at least 3 columns")
    return pts[:, :3]


def write_xyz(path, cloud: np.ndarray) -> None:
    np.savetxt(path, np.asarray(cloud)[:, :3], fmt="%.6f")


def load_cloud(path) -> np.ndarray:
    """Dispatch on extension: ``.bin`` -> velodyne, anything else -> text xyz."""
    path = Path(path)
    if path.suffix == ".bin":
        return read_velodyne_bin(path)
    return read_xyz(path)


def write_frames(path, frames: Sequence[bytes]) -> None:
    """Write length-prefixed frames to a ``.rcpcc`` file."""
    with open(path, "wb") as fh:
        for blob in frames:
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def read_frames(path) -> Iterator[bytes]:
    """Yield frame byte blobs from a length-prefixed file."""
    data = Path(path).read_bytes()
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise CorruptStream("truncated length prefix")
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + length > len(data):
            raise CorruptStream("truncated frame body")
        yield data[pos : pos + length]
        pos += length
