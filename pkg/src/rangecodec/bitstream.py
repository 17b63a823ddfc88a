"""Bit-exact frame serialization and the lossless entropy stage.

Frame layout (little-endian throughout):

    header (43 bytes, plain)  ||  entropy-coded payload

    payload = occupancy bitmap (ceil(W*H/8) bytes, row-major, MSB first)
           || surface tuples   ({row:u16, col:u16, len:u16, a:f32, b:f32, c:f32})
           || coefficients     (zig-zag varints over the packed support,
                                or raw f32 unfit ranges when q_step == 0)

The header carries every decode parameter so frames are self-contained.
The entropy backend is pluggable; ``zlib`` is the production default and
``identity`` exists for tests.  Both are lossless and deterministic.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import (
    BadMagic,
    CorruptStream,
    InconsistentShape,
    UnsupportedVersion,
)
from .sadct import QuantizedCoefficients, packed_support
from .surface import SurfaceTuple, fitted_mask_from_tuples

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "FrameHeader",
    "CompressedFrame",
    "serialize_sections",
    "deserialize_sections",
    "entropy_encode",
    "entropy_decode",
    "encode_frame",
    "decode_frame",
    "encode_varints",
    "decode_varints",
]

MAGIC = b"RIPC"
FORMAT_VERSION = 1

_HEADER_FMT = "<4sBHHffffffBIIB"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)
_TUPLE_FMT = "<HHHfff"
_TUPLE_SIZE = struct.calcsize(_TUPLE_FMT)

# Decode-side sanity bounds; anything beyond is treated as corruption.
_MAX_DIM = 16384
_MAX_CELLS = 1 << 26


@dataclass(frozen=True)
class FrameHeader:
    """All parameters a decoder needs, embedded in every frame."""

    width: int
    height: int
    delta_theta: float
    delta_phi: float
    h_offset: float
    v_offset: float
    delta_r: float
    q_step: float
    block_size: int
    surface_count: int
    point_count: int
    level_id: int = 0
    version: int = FORMAT_VERSION

    def pack(self) -> bytes:
        return struct.pack(
            _HEADER_FMT,
            MAGIC,
            self.version,
            self.width,
            self.height,
            self.delta_theta,
            self.delta_phi,
            self.h_offset,
            self.v_offset,
            self.delta_r,
            self.q_step,
            self.block_size,
            self.surface_count,
            self.point_count,
            self.level_id,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "FrameHeader":
        if len(data) < _HEADER_SIZE:
            raise CorruptStream("frame shorter than header")
        fields = struct.unpack_from(_HEADER_FMT, data)
        if fields[0] != MAGIC:
            raise BadMagic(f"bad magic {fields[0]!r}")
        if fields[1] != FORMAT_VERSION:
            raise UnsupportedVersion(f"unknown format version {fields[1]}")
        hdr = cls(
            width=fields[2],
            height=fields[3],
            delta_theta=fields[4],
            delta_phi=fields[5],
            h_offset=fields[6],
            v_offset=fields[7],
            delta_r=fields[8],
            q_step=fields[9],
            block_size=fields[10],
            surface_count=fields[11],
            point_count=fields[12],
            level_id=fields[13],
            version=fields[1],
        )
        hdr.validate()
        return hdr

    def validate(self) -> None:
        if not (1 <= self.width <= _MAX_DIM and 1 <= self.height <= _MAX_DIM):
            raise CorruptStream("implausible grid dimensions")
        if self.width * self.height > _MAX_CELLS:
            raise CorruptStream("grid too large")
        if self.block_size < 2:
            raise CorruptStream("invalid block size")
        for name in ("delta_theta", "delta_phi", "delta_r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise CorruptStream(f"invalid {name}")
        if not (np.isfinite(self.h_offset) and np.isfinite(self.v_offset)):
            raise CorruptStream("invalid offsets")
        if not (np.isfinite(self.q_step) and self.q_step >= 0):
            raise CorruptStream("invalid q_step")


@dataclass
class CompressedFrame:
    header: FrameHeader
    payload: bytes  # entropy-coded sections

    def to_bytes(self) -> bytes:
        return self.header.pack() + self.payload

    @property
    def nbytes(self) -> int:
        return _HEADER_SIZE + len(self.payload)


# ---------------------------------------------------------------------------
# Zig-zag varints


def encode_varints(values: np.ndarray) -> bytes:
    """LEB128-style varints of zig-zag mapped signed integers."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        return b""
    z = ((v << 1) ^ (v >> 63)).astype(np.uint64)
    lengths = np.ones(v.size, dtype=np.int64)
    zz = z >> np.uint64(7)
    while zz.any():
        lengths += zz > 0
        zz >>= np.uint64(7)
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    out = np.zeros(int(lengths.sum()), dtype=np.uint8)
    for k in range(int(lengths.max())):
        sel = lengths > k
        byte = ((z[sel] >> np.uint64(7 * k)) & np.uint64(0x7F)).astype(np.uint8)
        cont = (lengths[sel] - 1 > k).astype(np.uint8) * 0x80
        out[starts[sel] + k] = byte | cont
    return out.tobytes()


def decode_varints(buf: bytes, offset: int, count: int) -> Tuple[np.ndarray, int]:
    """Decode ``count`` varints starting at ``offset``; returns (values, end)."""
    if count == 0:
        return np.zeros(0, dtype=np.int64), offset
    b = np.frombuffer(buf, dtype=np.uint8, offset=offset)
    term = np.nonzero((b & 0x80) == 0)[0]
    if term.size < count:
        raise CorruptStream("truncated varint stream")
    ends = term[:count]
    starts = np.concatenate(([0], ends[:-1] + 1))
    lengths = ends - starts + 1
    if int(lengths.max()) > 10:
        raise CorruptStream("overlong varint")
    z = np.zeros(count, dtype=np.uint64)
    for k in range(int(lengths.max())):
        sel = lengths > k
        z[sel] |= (b[starts[sel] + k] & np.uint64(0x7F)).astype(np.uint64) << np.uint64(7 * k)
    dec = (z >> np.uint64(1)) ^ (np.uint64(0) - (z & np.uint64(1)))
    return dec.view(np.int64), offset + int(ends[-1]) + 1


# ---------------------------------------------------------------------------
# Entropy stage

_ZLIB_LEVEL = 6  # fixed for bit-exact determinism across runs


def _zlib_decode(data: bytes, max_size: int) -> bytes:
    d = zlib.decompressobj()
    try:
        out = d.decompress(data, max_size)
        if d.unconsumed_tail:
            raise CorruptStream("decompressed payload exceeds plausible size")
        if not d.eof:
            raise CorruptStream("truncated entropy stream")
        return out
    except zlib.error as exc:
        raise CorruptStream(f"entropy decode failed: {exc}") from exc


_BACKENDS = {
    "zlib": (lambda raw: zlib.compress(raw, _ZLIB_LEVEL), _zlib_decode),
    "identity": (lambda raw: raw, lambda data, max_size: data),
}


def entropy_encode(raw: bytes, backend: str = "zlib") -> bytes:
    """Lossless, deterministic compression of the serialized sections."""
    return _BACKENDS[backend][0](raw)


def entropy_decode(coded: bytes, backend: str = "zlib", max_size: int = 1 << 30) -> bytes:
    """Inverse of entropy_encode; raises CorruptStream on undecodable input."""
    return _BACKENDS[backend][1](coded, max_size)


# ---------------------------------------------------------------------------
# Sections


def serialize_sections(
    occupancy: np.ndarray,
    tuples: List[SurfaceTuple],
    coeffs: Optional[QuantizedCoefficients] = None,
    raw_values: Optional[np.ndarray] = None,
    block_size: int = 4,
) -> bytes:
    """Deterministic byte layout of mask, tuples and the coefficient stream.

    Exactly one of ``coeffs`` (quantized SA-DCT coefficients) or
    ``raw_values`` (full H x W array; unfit ranges stored as raw float32)
    must describe the unfit support, which is occupancy minus the pixels
    covered by the tuples.
    """
    H, W = occupancy.shape
    fitted = fitted_mask_from_tuples(occupancy, tuples, block_size)
    shape = occupancy & ~fitted
    parts = [np.packbits(occupancy.reshape(-1)).tobytes()]
    for t in sorted(tuples, key=lambda t: (t.row, t.col)):
        parts.append(struct.pack(_TUPLE_FMT, t.row, t.col, t.length, *t.coefficients))
    n_unfit = int(shape.sum())
    if coeffs is not None:
        support = packed_support(shape)
        if coeffs.matrix.shape != (H, W):
            raise InconsistentShape("coefficient matrix shape mismatch")
        if np.any(coeffs.matrix[~support] != 0):
            raise InconsistentShape("coefficients outside occupancy \\ fitted support")
        parts.append(encode_varints(coeffs.matrix[support]))
    elif raw_values is not None:
        if raw_values.shape != (H, W):
            raise InconsistentShape("raw value matrix shape mismatch")
        parts.append(raw_values[shape].astype("<f4").tobytes())
    elif n_unfit:
        raise InconsistentShape("unfit pixels present but no coefficient data")
    return b"".join(parts)


def deserialize_sections(payload: bytes, header: FrameHeader):
    """Parse payload sections; every length is bounds-checked.

    Returns (occupancy, tuples, coeffs) where coeffs is a
    QuantizedCoefficients for q_step > 0 or a raw H x W float array of
    unfit ranges for q_step == 0.
    """
    W, H = header.width, header.height
    bitmap_len = (W * H + 7) // 8
    tuples_len = header.surface_count * _TUPLE_SIZE
    if len(payload) < bitmap_len + tuples_len:
        raise CorruptStream("payload shorter than mask and tuple sections")

    bits = np.unpackbits(np.frombuffer(payload, np.uint8, count=bitmap_len))
    occupancy = bits[: W * H].astype(bool).reshape(H, W)
    if int(occupancy.sum()) != header.point_count:
        raise CorruptStream("occupancy does not match declared point count")

    tuples = []
    off = bitmap_len
    for _ in range(header.surface_count):
        row, col, length, a, b, c = struct.unpack_from(_TUPLE_FMT, payload, off)
        tuples.append(SurfaceTuple(row, col, length, (a, b, c)))
        off += _TUPLE_SIZE

    fitted = fitted_mask_from_tuples(occupancy, tuples, header.block_size)
    shape = occupancy & ~fitted
    n_unfit = int(shape.sum())

    if header.q_step > 0:
        vals, end = decode_varints(payload, off, n_unfit)
        if end != len(payload):
            raise CorruptStream("trailing bytes after coefficient stream")
        if vals.size and (vals.max() > np.iinfo(np.int32).max or vals.min() < np.iinfo(np.int32).min):
            raise CorruptStream("coefficient out of range")
        support = packed_support(shape)
        matrix = np.zeros((H, W), dtype=np.int32)
        matrix[support] = vals.astype(np.int32)
        coeffs: Union[QuantizedCoefficients, np.ndarray] = QuantizedCoefficients(
            matrix, header.q_step
        )
    else:
        if len(payload) - off != 4 * n_unfit:
            raise CorruptStream("raw range section has wrong length")
        raw = np.frombuffer(payload, dtype="<f4", count=n_unfit, offset=off).astype(np.float64)
        if n_unfit and (not np.all(np.isfinite(raw)) or np.any(raw <= 0)):
            raise CorruptStream("invalid raw range value")
        matrix = np.zeros((H, W))
        matrix[shape] = raw
        coeffs = matrix
    return occupancy, tuples, coeffs


# ---------------------------------------------------------------------------
# Whole frames


def encode_frame(
    occupancy: np.ndarray,
    tuples: List[SurfaceTuple],
    coeffs: Optional[QuantizedCoefficients] = None,
    raw_values: Optional[np.ndarray] = None,
    *,
    header_fields: dict,
    backend: str = "zlib",
) -> CompressedFrame:
    """Serialize and entropy-code one frame.

    ``header_fields`` supplies everything but surface_count/point_count,
    which are derived here.
    """
    header = FrameHeader(
        surface_count=len(tuples),
        point_count=int(occupancy.sum()),
        **header_fields,
    )
    raw = serialize_sections(occupancy, tuples, coeffs, raw_values, header.block_size)
    return CompressedFrame(header, entropy_encode(raw, backend))


def decode_frame(blob: bytes, backend: str = "zlib"):
    """Parse a frame byte blob; inverse of encode_frame.

    Returns (occupancy, tuples, coeffs, header).  All failure modes raise
    a CorruptStream subclass (or BadMagic/UnsupportedVersion); arbitrary
    input never crashes.
    """
    header = FrameHeader.unpack(blob)
    cells = header.width * header.height
    max_size = (cells + 7) // 8 + header.surface_count * _TUPLE_SIZE + 10 * cells + 1024
    payload = entropy_decode(bytes(blob[_HEADER_SIZE:]), backend, max_size)
    occupancy, tuples, coeffs = deserialize_sections(payload, header)
    return occupancy, tuples, coeffs, header
