"""Quality and rate measurement in the range-image domain."""

from __future__ import annotations

import io
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import bitstream, pipeline, surface
from .errors import ConfigMismatch
from .range_image import RangeImage, project

__all__ = [
    "QualityReport",
    "range_mae",
    "compression_ratio",
    "evaluate_quality",
    "fitted_model_mae",
]


@dataclass
class QualityReport:
    """Per-frame (or averaged) quality and rate summary; MAE in cm."""

    overall_mae: float
    fitted_mae: float
    unfit_mae: float
    compression_ratio: float
    dropped_fraction: float
    fitted_fraction: float

    def to_csv_row(self) -> str:
        return ",".join(f"{getattr(self, f.name):.6g}" for f in fields(self))

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in fields(QualityReport))

    def pretty(self) -> str:
        buf = io.StringIO()
        for f in fields(self):
            buf.write(f"{f.name:>20}: {getattr(self, f.name):.4g}\n")
        return buf.getvalue()


def range_mae(
    original: RangeImage,
    reconstructed: RangeImage,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Mean |r_orig - r_rec| in centimeters over jointly occupied cells.

    ``mask`` optionally restricts the comparison (e.g. to fitted pixels).
    """
    a, b = original.config, reconstructed.config
    # Headers carry float32 angles, so compare with float32 tolerance.
    same = (a.width, a.height) == (b.width, b.height) and np.allclose(
        [a.delta_theta, a.delta_phi, a.h_offset, a.v_offset],
        [b.delta_theta, b.delta_phi, b.h_offset, b.v_offset],
        rtol=1e-6, atol=1e-9,
    )
    if not same:
        raise ConfigMismatch("range images use different projection configs")
    common = original.mask & reconstructed.mask
    if mask is not None:
        common &= mask
    if not common.any():
        return 0.0
    return float(np.mean(np.abs(original.values[common] - reconstructed.values[common]))) * 100.0


def compression_ratio(point_count: int, compressed_bytes: int) -> float:
    """Original size (16 bytes per point) over the final binary size."""
    if compressed_bytes <= 0:
        raise ValueError("compressed_bytes must be positive")
    if point_count == 0:
        return 0.0
    return point_count * pipeline.BYTES_PER_RAW_POINT / compressed_bytes


def fitted_model_mae(
    image: RangeImage,
    fit_cfg: surface.FitConfig,
    model: str,
    fit_points: Optional[np.ndarray] = None,
):
    """Fit with the given model and measure MAE over the fitted pixels.

    Returns (mae_cm, fitted_fraction); the ablation harness behind the
    plane-vs-surface comparison.  ``fit_points`` optionally supplies the
    true per-cell Cartesian coordinates for the plane model.
    """
    tuples, fitted_mask, _unfit = surface.encode_surfaces(image, fit_cfg, model, fit_points)
    values, fitted = surface.decode_surfaces(
        tuples, image.mask, fit_cfg, image.config, model
    )
    recon = RangeImage(image.config, values)
    occupied = int(image.mask.sum())
    frac = float(fitted.sum()) / occupied if occupied else 0.0
    return range_mae(image, recon, fitted), frac


def evaluate_quality(cloud: np.ndarray, level: pipeline.CompressionLevel) -> QualityReport:
    """Compress, decompress and compare one frame against its own projection."""
    frame, report = pipeline.compress(cloud, level)
    recon = pipeline.decompress_to_image(frame.to_bytes())
    original, stats = project(np.asarray(cloud)[:, :3], level.projection_config())

    # Split reconstructed occupancy into fitted and unfit using the same
    # pure function the decoder uses.
    occupancy, tuples, _coeffs, header = bitstream.decode_frame(frame.to_bytes())
    fitted = surface.fitted_mask_from_tuples(occupancy, tuples, header.block_size)

    return QualityReport(
        overall_mae=range_mae(original, recon),
        fitted_mae=range_mae(original, recon, fitted),
        unfit_mae=range_mae(original, recon, occupancy & ~fitted),
        compression_ratio=report.compression_ratio,
        dropped_fraction=stats.dropped_fraction,
        fitted_fraction=report.fitted_fraction,
    )
