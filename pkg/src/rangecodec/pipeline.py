"""End-to-end encoder/decoder orchestration and the compression ladder.

compress: project -> fit surfaces -> SA-DCT + quantize (or raw float32
ranges when q_step == 0) -> serialize + entropy code.
decompress is the exact inverse.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import bitstream, sadct, surface
from .errors import CorruptStream
from .range_image import ProjectionConfig, RangeImage, back_project, project

__all__ = [
    "CompressionLevel",
    "EncodeReport",
    "default_ladder",
    "compress",
    "decompress",
    "decompress_to_image",
    "BYTES_PER_RAW_POINT",
]

# Raw-size convention: float32 x, y, z, intensity per input point.
BYTES_PER_RAW_POINT = 16

# Reconstructed unfit ranges are clamped to stay positive; coarse
# quantization can otherwise push a near-zero range negative.
_MIN_RANGE = 1e-3


@dataclass(frozen=True)
class CompressionLevel:
    """One rung of the fine-to-coarse ladder.

    Angular resolutions are degrees (converted to radians internally);
    delta_r and q_step are meters.
    """

    id: int
    delta_theta: float
    delta_phi: float
    delta_r: float
    q_step: float

    def projection_config(self) -> ProjectionConfig:
        return ProjectionConfig.from_degrees(self.delta_theta, self.delta_phi)

    def fit_config(self, block_size: int = 4) -> surface.FitConfig:
        return surface.FitConfig(block_size=block_size, delta_r=self.delta_r)


def default_ladder() -> List[CompressionLevel]:
    """Six levels, fine (0) to coarse (5); level 2 is the reference setting
    (0.5, 0.5, 0.3, 0.2).  Every parameter is non-decreasing with id."""
    table = [
        (0, 0.25, 0.25, 0.10, 0.05),
        (1, 0.35, 0.35, 0.20, 0.10),
        (2, 0.50, 0.50, 0.30, 0.20),
        (3, 0.70, 0.70, 0.50, 0.40),
        (4, 1.00, 1.00, 0.80, 0.70),
        (5, 1.40, 1.40, 1.20, 1.00),
    ]
    return [CompressionLevel(*row) for row in table]


@dataclass
class EncodeReport:
    raw_bytes: int
    compressed_bytes: int
    compression_ratio: float
    fitted_fraction: float
    encode_time_ms: float
    points_in: int = 0
    points_projected: int = 0


def compress(
    cloud: np.ndarray,
    level: CompressionLevel,
    block_size: int = 4,
    backend: str = "zlib",
) -> Tuple[bitstream.CompressedFrame, EncodeReport]:
    """Compress one point cloud frame at the given ladder level."""
    t0 = time.perf_counter()
    proj_cfg = level.projection_config()
    fit_cfg = level.fit_config(block_size)

    image, stats = project(np.asarray(cloud)[:, :3] if len(cloud) else np.zeros((0, 3)), proj_cfg)
    tuples, fitted_mask, unfit = surface.encode_surfaces(image, fit_cfg)
    shape = unfit.values > 0

    header_fields = dict(
        width=proj_cfg.width,
        height=proj_cfg.height,
        delta_theta=proj_cfg.delta_theta,
        delta_phi=proj_cfg.delta_phi,
        h_offset=proj_cfg.h_offset,
        v_offset=proj_cfg.v_offset,
        delta_r=fit_cfg.delta_r,
        q_step=level.q_step,
        block_size=block_size,
        level_id=level.id,
    )
    if level.q_step > 0:
        coeffs = sadct.quantize(sadct.sa_dct_forward(unfit.values, shape), level.q_step)
        frame = bitstream.encode_frame(
            image.mask, tuples, coeffs, header_fields=header_fields, backend=backend
        )
    else:
        frame = bitstream.encode_frame(
            image.mask, tuples, raw_values=unfit.values,
            header_fields=header_fields, backend=backend,
        )

    elapsed_ms = (time.perf_counter() - t0) * 1e3
    n_in = int(len(cloud))
    raw_bytes = n_in * BYTES_PER_RAW_POINT
    occupied = int(image.mask.sum())
    report = EncodeReport(
        raw_bytes=raw_bytes,
        compressed_bytes=frame.nbytes,
        compression_ratio=raw_bytes / frame.nbytes if n_in else 0.0,
        fitted_fraction=float(fitted_mask.sum()) / occupied if occupied else 0.0,
        encode_time_ms=elapsed_ms,
        points_in=n_in,
        points_projected=stats.points_projected,
    )
    return frame, report


def decompress_to_image(blob: bytes, backend: str = "zlib") -> RangeImage:
    """Decode a frame to its reconstructed range image."""
    occupancy, tuples, coeffs, header = bitstream.decode_frame(blob, backend)
    proj_cfg = ProjectionConfig(
        delta_theta=header.delta_theta,
        delta_phi=header.delta_phi,
        h_offset=header.h_offset,
        v_offset=header.v_offset,
        width=header.width,
        height=header.height,
    )
    fit_cfg = surface.FitConfig(block_size=header.block_size, delta_r=header.delta_r)
    fitted_values, fitted_mask = surface.decode_surfaces(tuples, occupancy, fit_cfg)
    shape = occupancy & ~fitted_mask

    values = fitted_values
    if isinstance(coeffs, sadct.QuantizedCoefficients):
        unfit_values = sadct.sa_idct_inverse(sadct.dequantize(coeffs), shape)
        values = values + np.where(shape, np.maximum(unfit_values, _MIN_RANGE), 0.0)
    else:
        values = values + coeffs  # raw float32 ranges, already placed on shape
    if int(np.count_nonzero(values > 0)) != int(occupancy.sum()):
        raise CorruptStream("reconstructed occupancy mismatch")
    return RangeImage(proj_cfg, values)


def decompress(frame, backend: str = "zlib") -> np.ndarray:
    """Decode a frame (bytes or CompressedFrame) back to an (N, 3) cloud."""
    blob = frame.to_bytes() if isinstance(frame, bitstream.CompressedFrame) else bytes(frame)
    return back_project(decompress_to_image(blob, backend))
