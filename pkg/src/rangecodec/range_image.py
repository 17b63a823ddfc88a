"""Spherical projection between point clouds and 2D range images.

Point clouds are (N, 3) or (N, 4) float arrays of sensor-origin Cartesian
coordinates (x, y, z[, intensity]); the intensity column is carried by the
readers but ignored here.  A range image is an H x W grid where cell
(j, i) holds the radial distance r of the point mapped there, or 0 when
the cell is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProjectionConfig",
    "RangeImage",
    "ProjectionStats",
    "project",
    "project_with_sources",
    "back_project",
]


@dataclass(frozen=True)
class ProjectionConfig:
    """Angular discretization of the panoramic grid.

    Angles are radians; ``delta_theta``/``delta_phi`` are radians per pixel
    and the offsets shift azimuth/elevation so grid indices are
    non-negative.
    """

    delta_theta: float
    delta_phi: float
    h_offset: float
    v_offset: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.delta_theta > 0 and self.delta_phi > 0):
            raise ValueError("angular resolutions must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")

    @classmethod
    def from_degrees(
        cls,
        delta_theta_deg: float,
        delta_phi_deg: float,
        h_fov_deg: float = 360.0,
        v_fov_deg: float = 28.0,
        h_offset_deg: float = 180.0,
        v_offset_deg: float = 25.0,
    ) -> "ProjectionConfig":
        """Build a config from degree-valued resolutions and FOV.

        Defaults match a KITTI-style sensor: full 360 azimuth and a 28
        degree vertical FOV with elevation in [-25, +3] degrees.
        """
        width = math.ceil(h_fov_deg / delta_theta_deg)
        height = math.ceil(v_fov_deg / delta_phi_deg)
        return cls(
            delta_theta=math.radians(delta_theta_deg),
            delta_phi=math.radians(delta_phi_deg),
            h_offset=math.radians(h_offset_deg),
            v_offset=math.radians(v_offset_deg),
            width=width,
            height=height,
        )


@dataclass
class RangeImage:
    """H x W grid of ranges; 0 marks an empty cell (stored r is always > 0)."""

    config: ProjectionConfig
    values: np.ndarray  # (H, W) float64, 0 where empty

    @property
    def mask(self) -> np.ndarray:
        return self.values > 0

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.values))

    def copy(self) -> "RangeImage":
        return RangeImage(self.config, self.values.copy())

    @classmethod
    def empty(cls, config: ProjectionConfig) -> "RangeImage":
        return cls(config, np.zeros((config.height, config.width)))


@dataclass
class ProjectionStats:
    """Bookkeeping of where input points went during projection."""

    points_in: int = 0
    points_projected: int = 0
    points_out_of_fov: int = 0
    points_collided: int = 0

    @property
    def dropped_fraction(self) -> float:
        if self.points_in == 0:
            return 0.0
        return 1.0 - self.points_projected / self.points_in


def project(cloud: np.ndarray, config: ProjectionConfig):
    """Project a point cloud onto the panoramic grid.

    Cell indices follow i = floor((atan2(y, x) + h_offset) / dtheta) and
    j = floor((atan2(z, sqrt(x^2+y^2)) + v_offset) / dphi).  Points
    falling outside the grid are dropped and counted; when several points
    land in one cell the smallest range wins (the nearest surface is the
    one a sensor would have seen).

    Returns (RangeImage, ProjectionStats).
    """
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.ndim != 2 or cloud.shape[1] < 3:
        raise ValueError("cloud must be an (N, >=3) array")
    xyz = cloud[:, :3]
    n_in = xyz.shape[0]

    r = np.sqrt(np.einsum("ij,ij->i", xyz, xyz))
    valid = r > 0
    x, y, z = xyz[valid, 0], xyz[valid, 1], xyz[valid, 2]
    rv = r[valid]

    theta = np.arctan2(y, x)
    phi = np.arctan2(z, np.hypot(x, y))
    i = np.floor((theta + config.h_offset) / config.delta_theta).astype(np.int64)
    j = np.floor((phi + config.v_offset) / config.delta_phi).astype(np.int64)

    in_fov = (i >= 0) & (i < config.width) & (j >= 0) & (j < config.height)
    i, j, rv = i[in_fov], j[in_fov], rv[in_fov]

    flat = np.full(config.height * config.width, np.inf)
    np.minimum.at(flat, j * config.width + i, rv)
    values = flat.reshape(config.height, config.width)
    values[np.isinf(values)] = 0.0

    projected = int(np.count_nonzero(values))
    in_bounds = int(in_fov.sum())
    stats = ProjectionStats(
        points_in=n_in,
        points_projected=projected,
        points_out_of_fov=n_in - in_bounds,  # includes unprojectable r == 0 points
        points_collided=in_bounds - projected,
    )
    return RangeImage(config, values), stats


def project_with_sources(cloud: np.ndarray, config: ProjectionConfig):
    """Project and also report which input point each occupied cell kept.

    Returns (RangeImage, ProjectionStats, sources) where ``sources`` is an
    (H, W) int64 map holding the cloud row index of the winning (nearest)
    point per cell, or -1 where the cell is empty.  Fitting geometric
    models on the true Cartesian coordinates (rather than on cell-center
    reconstructions) needs this correspondence.
    """
    cloud = np.asarray(cloud, dtype=np.float64)
    image, stats = project(cloud, config)

    xyz = cloud[:, :3]
    r = np.sqrt(np.einsum("ij,ij->i", xyz, xyz))
    valid = np.nonzero(r > 0)[0]
    x, y, z = xyz[valid, 0], xyz[valid, 1], xyz[valid, 2]
    theta = np.arctan2(y, x)
    phi = np.arctan2(z, np.hypot(x, y))
    i = np.floor((theta + config.h_offset) / config.delta_theta).astype(np.int64)
    j = np.floor((phi + config.v_offset) / config.delta_phi).astype(np.int64)
    in_fov = (i >= 0) & (i < config.width) & (j >= 0) & (j < config.height)
    idx = valid[in_fov]
    cell = j[in_fov] * config.width + i[in_fov]

    # First point per cell after sorting by (cell, range) is the winner.
    order = np.lexsort((r[idx], cell))
    cell, idx = cell[order], idx[order]
    first = np.ones(cell.shape[0], dtype=bool)
    first[1:] = cell[1:] != cell[:-1]

    sources = np.full(config.height * config.width, -1, dtype=np.int64)
    sources[cell[first]] = idx[first]
    return image, stats, sources.reshape(config.height, config.width)


def back_project(image: RangeImage) -> np.ndarray:
    """Reconstruct Cartesian points from occupied cells.

    Uses the pixel-center convention: theta = (i + 1/2) * dtheta -
    h_offset and phi = (j + 1/2) * dphi - v_offset, which halves the
    systematic angular quantization bias of corner-based reconstruction.
    Returns an (M, 3) float64 array in row-major cell order.
    """
    cfg = image.config
    j, i = np.nonzero(image.mask)
    r = image.values[j, i]
    theta = (i + 0.5) * cfg.delta_theta - cfg.h_offset
    phi = (j + 0.5) * cfg.delta_phi - cfg.v_offset
    cos_phi = np.cos(phi)
    return np.column_stack(
        (r * cos_phi * np.cos(theta), r * cos_phi * np.sin(theta), r * np.sin(phi))
    )


def cell_angles(config: ProjectionConfig, i: np.ndarray, j: np.ndarray):
    """Pixel-center (theta, phi) for grid indices; used by the plane model."""
    theta = (np.asarray(i) + 0.5) * config.delta_theta - config.h_offset
    phi = (np.asarray(j) + 0.5) * config.delta_phi - config.v_offset
    return theta, phi
