"""Real-time LiDAR point cloud codec and streaming toolkit.

Compression runs range-image projection, macroblock surface fitting and
a shape-adaptive DCT over the unfit remainder; the streaming layer adds
a sender queue, bandwidth-shaped links and a QoE-driven adaptive bitrate
controller.
"""

from .range_image import ProjectionConfig, RangeImage, back_project, project
from .surface import (
    FitConfig,
    SurfaceTuple,
    decode_surfaces,
    encode_surfaces,
    fit_block,
    predict_range_plane,
    predict_range_surface,
)
from .sadct import (
    PackedCoefficients,
    QuantizedCoefficients,
    dct_matrix,
    dequantize,
    quantize,
    sa_dct_forward,
    sa_idct_inverse,
)
from .bitstream import CompressedFrame, FrameHeader, decode_frame, encode_frame
from .pipeline import CompressionLevel, EncodeReport, compress, decompress, default_ladder
from .metrics import QualityReport, compression_ratio, evaluate_quality, range_mae
from .abr import ControllerConfig, QoEParams, QueueController, SessionLog, evaluate_qoe
from .stream import BandwidthTrace, EncodedFrameSource, SimulatedLink, simulate

__version__ = "0.1.0"

__all__ = [
    "ProjectionConfig",
    "RangeImage",
    "project",
    "back_project",
    "FitConfig",
    "SurfaceTuple",
    "fit_block",
    "encode_surfaces",
    "decode_surfaces",
    "predict_range_surface",
    "predict_range_plane",
    "dct_matrix",
    "sa_dct_forward",
    "sa_idct_inverse",
    "PackedCoefficients",
    "QuantizedCoefficients",
    "quantize",
    "dequantize",
    "CompressedFrame",
    "FrameHeader",
    "encode_frame",
    "decode_frame",
    "CompressionLevel",
    "EncodeReport",
    "default_ladder",
    "compress",
    "decompress",
    "QualityReport",
    "range_mae",
    "compression_ratio",
    "evaluate_quality",
    "QoEParams",
    "ControllerConfig",
    "QueueController",
    "SessionLog",
    "evaluate_qoe",
    "BandwidthTrace",
    "SimulatedLink",
    "EncodedFrameSource",
    "simulate",
]
