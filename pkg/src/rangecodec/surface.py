"""Macroblock surface fitting over the range image.

The range image is tiled into B x B macroblocks.  Each block is fitted
with the inverse-range surface model

    1 / r_hat = alpha * i + beta * j + gamma

which is linear in the pixel indices, so the fit is an exact linear
least-squares solve.  A block is accepted only when every occupied pixel
satisfies |r - r_hat| < delta_r.  Accepted blocks are merged into
horizontal runs that share the first block's coefficients, and each run
is emitted as a (row, col, len, coefficients) tuple.

A Euclidean plane model (a*x + b*y + c*z + d = 0, range predicted from
the ray angles) is provided for ablation comparisons only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegeneratePlane, MalformedTuple, NonPositiveDenominator
from .range_image import ProjectionConfig, RangeImage, cell_angles

__all__ = [
    "FitConfig",
    "SurfaceTuple",
    "fit_block",
    "predict_range_surface",
    "predict_range_plane",
    "encode_surfaces",
    "decode_surfaces",
    "fitted_mask_from_tuples",
]

# Blocks whose normal matrix has an eigenvalue ratio below this are
# treated as singular (collinear pixels) and sent to the unfit image.
_SINGULAR_EIG_RATIO = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Macroblock fitting parameters."""

    block_size: int = 4
    delta_r: float = 0.3
    min_points: int = 4

    def __post_init__(self):
        if self.block_size < 2:
            raise ValueError("block_size must be >= 2")
        if not self.delta_r > 0:
            raise ValueError("delta_r must be positive")
        if self.min_points < 3:
            raise ValueError("min_points must be >= 3 for a 3-parameter fit")


@dataclass(frozen=True)
class SurfaceTuple:
    """One merged run of fitted blocks: grid position plus shared coefficients."""

    row: int
    col: int
    length: int
    coefficients: tuple  # (alpha, beta, gamma) as float32-representable floats


def predict_range_surface(coefficients, i, j):
    """Evaluate the surface model at absolute pixel indices.

    Raises NonPositiveDenominator when alpha*i + beta*j + gamma <= 0;
    callers performing the delta_r test treat that as a fit failure.
    """
    alpha, beta, gamma = (float(c) for c in coefficients)
    denom = alpha * np.asarray(i, dtype=np.float64) + beta * np.asarray(j, dtype=np.float64) + gamma
    if np.any(denom <= 0):
        raise NonPositiveDenominator("surface denominator <= 0")
    out = 1.0 / denom
    return out if out.ndim else float(out)


def predict_range_plane(a, b, c, d, theta, phi):
    """Predict range from a Euclidean plane along the ray (theta, phi)."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    cos_phi = np.cos(phi)
    denom = a * cos_phi * np.cos(theta) + b * cos_phi * np.sin(theta) + c * np.sin(phi)
    if np.any(denom == 0):
        raise DegeneratePlane("ray parallel to plane")
    out = -d / denom
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Batched per-block fitting


def _block_grid(H, W, B):
    return math.ceil(H / B), math.ceil(W / B)


def _gather_pixels(values, mask, B):
    """Occupied pixels grouped by block id, plus per-block slice offsets."""
    H, W = values.shape
    nbr, nbc = _block_grid(H, W, B)
    jj, ii = np.nonzero(mask)
    rr = values[jj, ii]
    bid = (jj // B) * nbc + (ii // B)
    order = np.argsort(bid, kind="stable")
    jj, ii, rr, bid = jj[order], ii[order], rr[order], bid[order]
    counts = np.bincount(bid, minlength=nbr * nbc).astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(counts)))
    return jj, ii, rr, bid, counts, starts


def _surface_fit_batched(ii, jj, rr, bid, counts, min_points):
    """Solve the per-block normal equations for all blocks at once.

    Returns (params (nb, 3) float32, solvable mask).  Blocks with too few
    points or a singular normal matrix are marked unsolvable.
    """
    nb = counts.shape[0]
    t = 1.0 / rr
    fi = ii.astype(np.float64)
    fj = jj.astype(np.float64)

    def acc(w):
        return np.bincount(bid, weights=w, minlength=nb)

    A = np.empty((nb, 3, 3))
    A[:, 0, 0] = acc(fi * fi)
    A[:, 0, 1] = A[:, 1, 0] = acc(fi * fj)
    A[:, 0, 2] = A[:, 2, 0] = acc(fi)
    A[:, 1, 1] = acc(fj * fj)
    A[:, 1, 2] = A[:, 2, 1] = acc(fj)
    A[:, 2, 2] = counts
    b = np.stack([acc(fi * t), acc(fj * t), acc(t)], axis=1)

    candidates = counts >= min_points
    params = np.full((nb, 3), np.nan, dtype=np.float32)
    if not candidates.any():
        return params, np.zeros(nb, dtype=bool)

    sub = np.nonzero(candidates)[0]
    eig = np.linalg.eigvalsh(A[sub])
    nonsingular = eig[:, 0] > _SINGULAR_EIG_RATIO * eig[:, -1]
    sub = sub[nonsingular]
    if sub.size:
        params[sub] = np.linalg.solve(A[sub], b[sub][:, :, None])[:, :, 0].astype(np.float32)
    solvable = np.zeros(nb, dtype=bool)
    solvable[sub] = True
    return params, solvable


def _plane_fit_batched(points, bid, counts, min_points, nb):
    """Least-squares plane per block: centroid + smallest covariance axis."""
    sums = np.stack([np.bincount(bid, weights=points[:, k], minlength=nb) for k in range(3)], axis=1)
    safe = np.maximum(counts, 1)[:, None]
    centroid = sums / safe

    centered = points - centroid[bid]
    cov = np.empty((nb, 3, 3))
    for a in range(3):
        for c in range(a, 3):
            cov[:, a, c] = cov[:, c, a] = np.bincount(
                bid, weights=centered[:, a] * centered[:, c], minlength=nb
            )

    candidates = counts >= min_points
    params = np.full((nb, 4), np.nan, dtype=np.float32)
    solvable = np.zeros(nb, dtype=bool)
    sub = np.nonzero(candidates)[0]
    if not sub.size:
        return params, solvable
    w, v = np.linalg.eigh(cov[sub])
    # Degenerate when the two smallest axes both vanish (points on a line).
    ok = w[:, 1] > _SINGULAR_EIG_RATIO * np.maximum(w[:, 2], 1e-300)
    normals = v[:, :, 0]
    d = -np.einsum("ij,ij->i", normals, centroid[sub])
    params[sub, :3] = normals.astype(np.float32)
    params[sub, 3] = d.astype(np.float32)
    solvable[sub[ok]] = True
    return params, solvable


class _SurfaceModel:
    """Inverse-range model; basis per pixel is (i, j, 1)."""

    n_params = 3

    def __init__(self, ii, jj):
        self.basis = np.stack(
            [ii.astype(np.float64), jj.astype(np.float64), np.ones(ii.shape[0])], axis=1
        )

    def fit(self, ii, jj, rr, bid, counts, min_points, nb):
        return _surface_fit_batched(ii, jj, rr, bid, counts, min_points)

    def predict_slice(self, params, sl):
        """Predicted ranges on a pixel slice; NaN where the model is invalid."""
        denom = self.basis[sl] @ np.asarray(params, dtype=np.float64)
        with np.errstate(divide="ignore"):
            rhat = np.where(denom > 0, 1.0 / denom, np.nan)
        return rhat

    def predict_per_pixel(self, params, bid):
        denom = np.einsum("ij,ij->i", self.basis, params[bid].astype(np.float64))
        with np.errstate(divide="ignore"):
            return np.where(denom > 0, 1.0 / denom, np.nan)


class _PlaneModel:
    """Euclidean plane model; basis per pixel is the unit ray direction."""

    n_params = 4

    def __init__(self, ii, jj, config: ProjectionConfig, fit_points=None):
        theta, phi = cell_angles(config, ii, jj)
        cos_phi = np.cos(phi)
        self.basis = np.stack([cos_phi * np.cos(theta), cos_phi * np.sin(theta), np.sin(phi)], axis=1)
        # True Cartesian coordinates per pixel when the caller has them;
        # the decoder-side evaluation still only has cell-center angles.
        self.fit_points = fit_points

    def fit(self, ii, jj, rr, bid, counts, min_points, nb):
        if self.fit_points is not None:
            points = np.asarray(self.fit_points, dtype=np.float64)[jj, ii]
        else:
            points = self.basis * rr[:, None]
        return _plane_fit_batched(points, bid, counts, min_points, nb)

    def _ranges(self, denom, d):
        with np.errstate(divide="ignore", invalid="ignore"):
            rhat = np.where(np.abs(denom) > 1e-300, -d / denom, np.nan)
        return np.where(rhat > 0, rhat, np.nan)

    def predict_slice(self, params, sl):
        p = np.asarray(params, dtype=np.float64)
        denom = self.basis[sl] @ p[:3]
        return self._ranges(denom, p[3])

    def predict_per_pixel(self, params, bid):
        p = params[bid].astype(np.float64)
        denom = np.einsum("ij,ij->i", self.basis, p[:, :3])
        return self._ranges(denom, p[:, 3])


def _make_model(name, ii, jj, config, fit_points=None):
    if name == "surface":
        return _SurfaceModel(ii, jj)
    if name == "plane":
        if config is None:
            raise ValueError("plane model needs the projection config")
        return _PlaneModel(ii, jj, config, fit_points)
    raise ValueError(f"unknown model {name!r}")


def fit_block(image: RangeImage, block: Tuple[int, int], config: FitConfig):
    """Fit one macroblock; returns (alpha, beta, gamma) or None.

    ``block`` is (block_row, block_col).  None signals the block's points
    go to the unfit image: too few points, a singular system, a
    non-positive denominator, or a delta_r test failure.
    """
    B = config.block_size
    br, bc = block
    H, W = image.values.shape
    nbr, nbc = _block_grid(H, W, B)
    if not (0 <= br < nbr and 0 <= bc < nbc):
        raise ValueError("block outside grid")
    sub = image.values[br * B : (br + 1) * B, bc * B : (bc + 1) * B]
    jj, ii = np.nonzero(sub > 0)
    if jj.size < config.min_points:
        return None
    jj = jj + br * B
    ii = ii + bc * B
    rr = image.values[jj, ii]
    bid = np.zeros(jj.size, dtype=np.int64)
    params, solvable = _surface_fit_batched(ii, jj, rr, bid, np.array([jj.size]), config.min_points)
    if not solvable[0]:
        return None
    coeffs = params[0]
    denom = coeffs[0].astype(np.float64) * ii + coeffs[1].astype(np.float64) * jj + np.float64(coeffs[2])
    if np.any(denom <= 0):
        return None
    if np.any(np.abs(rr - 1.0 / denom) >= config.delta_r):
        return None
    return tuple(float(c) for c in coeffs)


def encode_surfaces(
    image: RangeImage,
    config: FitConfig,
    model: str = "surface",
    fit_points=None,
):
    """Fit, merge and split the image into surface runs and an unfit rest.

    Scans blocks row-major.  A fitted block opens a run; each following
    block in the same block-row is tested with the run's coefficients
    against delta_r over all of its occupied pixels and merged on success
    without refitting.  Empty blocks close the current run and are
    otherwise skipped.

    ``fit_points`` (plane model only) is an optional (H, W, 3) array of
    the true Cartesian coordinates behind each occupied cell; the plane is
    then fit on real geometry while prediction still happens at the
    cell-center angles that are all a decoder would know.

    Returns (tuples, fitted_mask, unfit_image); fitted pixels are removed
    from the unfit image so its occupancy is exactly occupancy \\ fitted.
    """
    values = image.values
    mask = values > 0
    H, W = values.shape
    B = config.block_size
    nbr, nbc = _block_grid(H, W, B)

    jj, ii, rr, bid, counts, starts = _gather_pixels(values, mask, B)
    mdl = _make_model(model, ii, jj, image.config, fit_points)
    params, solvable = mdl.fit(ii, jj, rr, bid, counts, config.min_points, nbr * nbc)

    # Standalone acceptance: every occupied pixel of the block passes the
    # delta_r test under the block's own (float32) coefficients.
    rhat = mdl.predict_per_pixel(params, bid)
    with np.errstate(invalid="ignore"):
        pixel_ok = np.abs(rr - rhat) < config.delta_r
    bad = np.bincount(bid, weights=(~pixel_ok).astype(np.float64), minlength=nbr * nbc)
    block_ok = solvable & (bad == 0) & (counts >= config.min_points)

    delta_r = config.delta_r
    tuples: List[SurfaceTuple] = []
    fitted_blocks = np.zeros(nbr * nbc, dtype=bool)

    for br in range(nbr):
        run_start = -1
        run_len = 0
        run_params = None
        base = br * nbc
        for bc in range(nbc):
            b = base + bc
            sl = slice(starts[b], starts[b + 1])
            n = starts[b + 1] - starts[b]
            if run_params is not None and n > 0:
                pred = mdl.predict_slice(run_params, sl)
                with np.errstate(invalid="ignore"):
                    ok = np.all(np.abs(rr[sl] - pred) < delta_r)
                if ok:
                    run_len += 1
                    fitted_blocks[b] = True
                    continue
            if run_params is not None:
                tuples.append(SurfaceTuple(br, run_start, run_len, tuple(map(float, run_params))))
                run_params = None
            if n > 0 and block_ok[b]:
                run_start, run_len, run_params = bc, 1, params[b]
                fitted_blocks[b] = True
        if run_params is not None:
            tuples.append(SurfaceTuple(br, run_start, run_len, tuple(map(float, run_params))))

    block_map = np.kron(
        fitted_blocks.reshape(nbr, nbc), np.ones((B, B), dtype=bool)
    )[:H, :W]
    fitted_mask = mask & block_map
    unfit = RangeImage(image.config, np.where(fitted_mask, 0.0, values))
    return tuples, fitted_mask, unfit


def fitted_mask_from_tuples(occupancy: np.ndarray, tuples, block_size: int) -> np.ndarray:
    """Occupied pixels covered by any run extent; shared by encoder/decoder."""
    H, W = occupancy.shape
    B = block_size
    nbr, nbc = _block_grid(H, W, B)
    covered = np.zeros((H, W), dtype=bool)
    for t in tuples:
        if not (0 <= t.row < nbr and 0 <= t.col < nbc and t.length >= 1 and t.col + t.length <= nbc):
            raise MalformedTuple(f"run out of bounds: {t.row},{t.col},{t.length}")
        covered[t.row * B : (t.row + 1) * B, t.col * B : (t.col + t.length) * B] = True
    return covered & occupancy


def decode_surfaces(
    tuples,
    occupancy: np.ndarray,
    config: FitConfig,
    projection: Optional[ProjectionConfig] = None,
    model: str = "surface",
):
    """Reconstruct fitted pixels from tuples and the occupancy mask.

    Returns (values, fitted_mask) where values holds predicted ranges at
    fitted pixels and 0 elsewhere.  The fitted mask is a pure function of
    (tuples, occupancy), so it matches the encoder's bit for bit.
    """
    H, W = occupancy.shape
    B = config.block_size
    fitted = fitted_mask_from_tuples(occupancy, tuples, B)
    values = np.zeros((H, W))
    jall, iall = np.nonzero(fitted)
    if jall.size == 0:
        return values, fitted
    mdl = _make_model(model, iall, jall, projection)

    # Map each fitted pixel to the tuple covering it (later tuples win on
    # hostile overlaps, matching row-major overwrite semantics).
    nbr, nbc = _block_grid(H, W, B)
    owner = np.full(nbr * nbc, -1, dtype=np.int64)
    for idx, t in enumerate(tuples):
        owner[t.row * nbc + t.col : t.row * nbc + t.col + t.length] = idx
    pix_owner = owner[(jall // B) * nbc + (iall // B)]

    all_params = np.asarray([t.coefficients for t in tuples], dtype=np.float32)
    rhat = mdl.predict_per_pixel(all_params, pix_owner)
    if np.any(~np.isfinite(rhat)):
        raise MalformedTuple("surface evaluates to a non-positive range")
    values[jall, iall] = rhat
    return values, fitted
