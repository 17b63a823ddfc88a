"""Spherical projection and back-projection."""

import math

import numpy as np
import pytest

from rangecodec.range_image import (
    ProjectionConfig,
    RangeImage,
    back_project,
    project,
    project_with_sources,
)
from rangecodec.synthetic import cloud_from_image, random_range_image

DEG_CFG = ProjectionConfig.from_degrees(1.0, 1.0)


class TestProjectionConfig:
    def test_from_degrees_dimensions(self):
        cfg = ProjectionConfig.from_degrees(0.5, 0.5)
        assert (cfg.width, cfg.height) == (720, 56)
        assert cfg.delta_theta == pytest.approx(math.radians(0.5))
        assert cfg.h_offset == pytest.approx(math.pi)

    def test_ceil_dimensioning(self):
        cfg = ProjectionConfig.from_degrees(0.7, 0.7)
        assert cfg.width == math.ceil(360 / 0.7)
        assert cfg.height == math.ceil(28 / 0.7)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(delta_theta=0.0, delta_phi=0.1, h_offset=0, v_offset=0, width=4, height=4),
            dict(delta_theta=0.1, delta_phi=-1.0, h_offset=0, v_offset=0, width=4, height=4),
            dict(delta_theta=0.1, delta_phi=0.1, h_offset=0, v_offset=0, width=0, height=4),
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ProjectionConfig(**kwargs)


class TestProject:
    def test_unit_x_axis_point(self):
        # [TRIVIAL] atan2(0, 1) = 0 -> i = 180 deg / 1 deg; phi = 0 -> j = 25.
        image, stats = project(np.array([[1.0, 0.0, 0.0]]), DEG_CFG)
        assert image.values[25, 180] == pytest.approx(1.0)
        assert stats.points_projected == 1

    def test_unit_y_axis_point(self):
        # [TRIVIAL] atan2(1, 0) = 90 deg -> i = 270.
        image, _ = project(np.array([[0.0, 1.0, 0.0]]), DEG_CFG)
        assert image.values[25, 270] == pytest.approx(1.0)

    def test_collision_keeps_minimum_range(self):
        near = [1.0, 0.0, 0.0]
        far = [5.0, 0.0, 0.0]
        image, stats = project(np.array([far, near]), DEG_CFG)
        assert image.values[25, 180] == pytest.approx(1.0)
        assert stats.points_collided == 1

    def test_zero_range_point_skipped(self):
        image, stats = project(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), DEG_CFG)
        assert stats.points_projected == 1
        assert image.occupied_count == 1

    def test_out_of_fov_dropped_and_counted(self):
        # Elevation 45 deg is far above the +3 deg ceiling.
        image, stats = project(np.array([[1.0, 0.0, 1.0]]), DEG_CFG)
        assert image.occupied_count == 0
        assert stats.points_out_of_fov == 1

    def test_drop_accounting_conserves_points(self, rng):
        cloud = rng.normal(0, 20, (5000, 3))
        _, stats = project(cloud, DEG_CFG)
        assert stats.points_in == 5000
        assert (
            stats.points_projected + stats.points_out_of_fov + stats.points_collided
            == stats.points_in
        )

    def test_rejects_bad_cloud_shape(self):
        with pytest.raises(ValueError):
            project(np.zeros((4, 2)), DEG_CFG)

    def test_index_bounds(self, rng):
        cloud = rng.normal(0, 30, (20000, 3))
        image, _ = project(cloud, DEG_CFG)
        j, i = np.nonzero(image.mask)
        assert i.min() >= 0 and i.max() < DEG_CFG.width
        assert j.min() >= 0 and j.max() < DEG_CFG.height


class TestBackProject:
    def test_empty_image_yields_empty_cloud(self):
        # [TRIVIAL] no occupied cells -> no points.
        assert back_project(RangeImage.empty(DEG_CFG)).shape == (0, 3)

    def test_single_cell_on_axis(self):
        # [TRIVIAL] cell whose center angles are exactly zero -> (5, 0, 0).
        cfg = ProjectionConfig(
            delta_theta=0.1, delta_phi=0.1, h_offset=0.05, v_offset=0.05, width=1, height=1
        )
        values = np.array([[5.0]])
        pts = back_project(RangeImage(cfg, values))
        np.testing.assert_allclose(pts, [[5.0, 0.0, 0.0]], atol=1e-12)

    def test_range_preserved_exactly(self, rng):
        # [DERIVED] ranges survive the projection round trip bit-for-bit;
        # angles move by at most half a pixel pitch.
        cloud = rng.normal(0, 15, (1000, 3))
        image, _ = project(cloud, DEG_CFG)
        back = back_project(image)
        r_cells = image.values[image.mask]
        r_back = np.sqrt((back**2).sum(axis=1))
        np.testing.assert_allclose(np.sort(r_back), np.sort(r_cells), rtol=1e-12)

    def test_angular_error_within_half_pixel(self, rng):
        cloud = rng.normal(0, 15, (2000, 3))
        image, _ = project(cloud, DEG_CFG)
        back = back_project(image)
        # Every back-projected point re-projects into its own cell.
        image2, _ = project(back, image.config)
        assert np.array_equal(image.mask, image2.mask)

    def test_reprojection_idempotent(self, rng):
        # [DERIVED] project(back_project(img)) == img under pixel centers.
        image = random_range_image(ProjectionConfig.from_degrees(2.0, 2.0), 0.4, rng)
        image2, stats = project(back_project(image), image.config)
        assert np.array_equal(image.mask, image2.mask)
        np.testing.assert_allclose(
            image2.values[image2.mask], image.values[image.mask], rtol=1e-6
        )
        assert stats.points_collided == 0

    def test_float32_exact_round_trip(self, rng):
        # Ranges are float32-exact; sqrt(x^2+y^2+z^2) re-rounds in float64
        # but lands on the same float32 value, which is what the raw
        # storage mode persists.
        image = random_range_image(ProjectionConfig.from_degrees(2.0, 2.0), 0.5, rng)
        image2, _ = project(cloud_from_image(image), image.config)
        assert np.array_equal(image.mask, image2.mask)
        assert np.array_equal(
            image.values.astype(np.float32), image2.values.astype(np.float32)
        )


class TestProjectWithSources:
    def test_sources_point_at_cell_winners(self, rng):
        cloud = rng.normal(0, 15, (3000, 3))
        image, _, sources = project_with_sources(cloud, DEG_CFG)
        assert sources.shape == (DEG_CFG.height, DEG_CFG.width)
        assert np.array_equal(sources >= 0, image.mask)
        j, i = np.nonzero(image.mask)
        winners = cloud[sources[j, i]]
        r = np.sqrt((winners**2).sum(axis=1))
        np.testing.assert_allclose(r, image.values[j, i], rtol=1e-12)

    def test_winner_is_minimum_range_point(self):
        near = [1.0, 0.0, 0.0]
        far = [5.0, 0.0, 0.0]
        cloud = np.array([far, near])
        _, _, sources = project_with_sources(cloud, DEG_CFG)
        assert sources[25, 180] == 1

    def test_matches_plain_project(self, rng):
        cloud = rng.normal(0, 15, (2000, 3))
        image_a, stats_a = project(cloud, DEG_CFG)
        image_b, stats_b, _ = project_with_sources(cloud, DEG_CFG)
        assert np.array_equal(image_a.values, image_b.values)
        assert stats_a == stats_b
