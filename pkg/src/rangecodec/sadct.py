"""Shape-adaptive DCT over an arbitrarily shaped support, plus quantization.

Forward: each column's occupied values are shifted to the top edge and
transformed with a length-L 1D DCT; the packed result is then shifted to
the left edge per row and transformed again.  The normalization factor is
A_L = sqrt(2 / L), which makes every 1D pass orthonormal, so the inverse
is exact and a single quantization step behaves uniformly across segment
lengths.

The packed layout is structural: column k keeps L_k slots (its occupied
count) and row p keeps R_p slots (the number of columns taller than p),
independent of coefficient values.  A zero DC coefficient never changes
the shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeMismatch

__all__ = [
    "dct_matrix",
    "sa_dct_forward",
    "sa_idct_inverse",
    "PackedCoefficients",
    "QuantizedCoefficients",
    "quantize",
    "dequantize",
    "column_lengths",
    "row_supports",
    "packed_support",
]


@lru_cache(maxsize=None)
def _dct_matrix_cached(L: int):
    p = np.arange(L)[:, None]
    k = np.arange(L)[None, :]
    M = np.cos(p * (k + 0.5) * np.pi / L)
    M[0, :] *= np.sqrt(0.5)
    M.setflags(write=False)
    return M


def dct_matrix(L: int) -> np.ndarray:
    """Length-L 1D DCT matrix: entry (p, k) = a0(p) * cos(p(k+1/2)pi/L).

    a0(0) = sqrt(1/2), otherwise 1, so (2/L) * M.T @ M = I.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    return _dct_matrix_cached(L)


@dataclass
class PackedCoefficients:
    """Top-left packed SA-DCT coefficient matrix (H x W, zeros outside)."""

    matrix: np.ndarray


@dataclass
class QuantizedCoefficients:
    """Integer coefficient matrix C* = round(C / q_step) with its step."""

    matrix: np.ndarray  # (H, W) int32
    q_step: float


def column_lengths(shape_mask: np.ndarray) -> np.ndarray:
    return shape_mask.sum(axis=0).astype(np.int64)


def row_supports(shape_mask: np.ndarray) -> np.ndarray:
    """Structural support per packed row: columns taller than the row index."""
    L = column_lengths(shape_mask)
    H = shape_mask.shape[0]
    return (L[None, :] > np.arange(H)[:, None]).sum(axis=1).astype(np.int64)


def packed_support(shape_mask: np.ndarray) -> np.ndarray:
    """Boolean mask of the final packed layout (row p: first R_p columns)."""
    H, W = shape_mask.shape
    R = row_supports(shape_mask)
    return np.arange(W)[None, :] < R[:, None]


def _pack(values: np.ndarray, mask: np.ndarray, axis: int):
    """Shift masked entries to the low edge along ``axis`` (stable order)."""
    order = np.argsort(~mask, axis=axis, kind="stable")
    return np.take_along_axis(np.where(mask, values, 0.0), order, axis=axis), order


def _transform_groups(packed: np.ndarray, lengths: np.ndarray, axis: int, inverse: bool):
    """Apply the per-vector DCT (or its inverse) grouped by segment length."""
    out = np.zeros_like(packed)
    for L in np.unique(lengths):
        if L == 0:
            continue
        idx = np.nonzero(lengths == L)[0]
        M = dct_matrix(int(L))
        scale = np.sqrt(2.0 / L)
        if axis == 0:
            X = packed[:L, idx]
            out[:L, idx] = scale * ((M.T if inverse else M) @ X)
        else:
            X = packed[idx, :L]
            out[idx, :L] = scale * (X @ (M if inverse else M.T))
    return out


def sa_dct_forward(values: np.ndarray, shape_mask: np.ndarray) -> PackedCoefficients:
    """Forward SA-DCT: column pass on top-aligned data, then row pass.

    ``values`` holds the unfit ranges (anything outside the mask is
    ignored); returns the packed coefficient matrix.
    """
    values = np.asarray(values, dtype=np.float64)
    L = column_lengths(shape_mask)
    col_packed, _ = _pack(values, shape_mask, axis=0)
    col_stage = _transform_groups(col_packed, L, axis=0, inverse=False)

    stage_mask = L[None, :] > np.arange(values.shape[0])[:, None]
    R = stage_mask.sum(axis=1).astype(np.int64)
    row_packed, _ = _pack(col_stage, stage_mask, axis=1)
    return PackedCoefficients(_transform_groups(row_packed, R, axis=1, inverse=False))


def sa_idct_inverse(coeffs: PackedCoefficients, shape_mask: np.ndarray) -> np.ndarray:
    """Inverse SA-DCT: undo the row pass, unshift, undo the column pass.

    Raises ShapeMismatch when nonzero coefficients lie outside the packed
    support the mask implies.  Returns values on the masked cells (zeros
    elsewhere).
    """
    C = np.asarray(coeffs.matrix, dtype=np.float64)
    if C.shape != shape_mask.shape:
        raise ShapeMismatch("coefficient matrix and shape mask disagree")
    support = packed_support(shape_mask)
    if np.any(C[~support] != 0):
        raise ShapeMismatch("coefficients outside the structural support")

    H, W = shape_mask.shape
    L = column_lengths(shape_mask)
    R = support.sum(axis=1).astype(np.int64)

    row_stage = _transform_groups(C, R, axis=1, inverse=True)
    stage_mask = L[None, :] > np.arange(H)[:, None]
    _, row_order = _pack(np.zeros_like(C), stage_mask, axis=1)
    col_stage = np.zeros_like(C)
    np.put_along_axis(col_stage, row_order, row_stage, axis=1)

    col_vals = _transform_groups(col_stage, L, axis=0, inverse=True)
    _, col_order = _pack(np.zeros_like(C), shape_mask, axis=0)
    out = np.zeros_like(C)
    np.put_along_axis(out, col_order, col_vals, axis=0)
    return np.where(shape_mask, out, 0.0)


def quantize(coeffs: PackedCoefficients, q_step: float) -> QuantizedCoefficients:
    """Uniform quantization, rounding half away from zero."""
    if not q_step > 0:
        raise ValueError("q_step must be positive")
    C = coeffs.matrix
    q = np.sign(C) * np.floor(np.abs(C) / q_step + 0.5)
    return QuantizedCoefficients(q.astype(np.int32), float(q_step))


def dequantize(q: QuantizedCoefficients) -> PackedCoefficients:
    return PackedCoefficients(q.matrix.astype(np.float64) * q.q_step)
