"""Macroblock surface fitting, run merging and surface decoding."""

import numpy as np
import pytest

from rangecodec.errors import DegeneratePlane, MalformedTuple, NonPositiveDenominator
from rangecodec.range_image import ProjectionConfig, RangeImage, project_with_sources
from rangecodec.surface import (
    FitConfig,
    SurfaceTuple,
    decode_surfaces,
    encode_surfaces,
    fit_block,
    fitted_mask_from_tuples,
    predict_range_plane,
    predict_range_surface,
)
from rangecodec.synthetic import random_range_image

CFG16 = ProjectionConfig.from_degrees(1.0, 1.0)


def image_from_surface(coeffs, width=16, height=4, occupancy=None):
    """Range image sampling 1/r = alpha*i + beta*j + gamma exactly."""
    alpha, beta, gamma = coeffs
    jj, ii = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    values = 1.0 / (alpha * ii + beta * jj + gamma)
    if occupancy is not None:
        values = np.where(occupancy, values, 0.0)
    cfg = ProjectionConfig(0.01, 0.01, 0.0, 0.0, width, height)
    return RangeImage(cfg, values)


class TestFitBlock:
    def test_constant_range_block(self):
        # [TRIVIAL] all r = 10 -> (0, 0, 0.1), zero residuals.
        img = image_from_surface((0.0, 0.0, 0.1), width=4, height=4)
        coeffs = fit_block(img, (0, 0), FitConfig(delta_r=0.01))
        np.testing.assert_allclose(coeffs, (0.0, 0.0, 0.1), atol=1e-6)

    def test_too_few_points(self):
        # [TRIVIAL] 2 occupied points with min_points=4 -> no fit.
        occ = np.zeros((4, 4), dtype=bool)
        occ[0, 0] = occ[1, 1] = True
        img = image_from_surface((0.0, 0.0, 0.1), 4, 4, occ)
        assert fit_block(img, (0, 0), FitConfig(delta_r=1.0)) is None

    def test_matches_least_squares_oracle(self, rng):
        # [DERIVED] against an independent np.linalg.lstsq solve on the
        # explicit design matrix, allowing only float32 output rounding.
        for _ in range(100):
            occ = rng.random((4, 4)) < 0.8
            if occ.sum() < 4:
                continue
            values = rng.uniform(1.0, 15.0, (4, 4))
            img = RangeImage(
                ProjectionConfig(0.01, 0.01, 0.0, 0.0, 4, 4), np.where(occ, values, 0.0)
            )
            coeffs = fit_block(img, (0, 0), FitConfig(delta_r=100.0))
            jj, ii = np.nonzero(occ)
            A = np.column_stack([ii, jj, np.ones(ii.size)])
            s = np.linalg.svd(A, compute_uv=False)
            if s[-1] / s[0] < 1e-6:
                # Ill-conditioned layouts: the two solvers may legitimately
                # disagree (normal equations square the condition number).
                continue
            oracle, *_ = np.linalg.lstsq(A, 1.0 / values[jj, ii], rcond=None)
            if coeffs is None:
                # Remaining refusals: a non-positive fitted denominator at
                # some occupied pixel, or a residual beyond delta_r.
                denom = A @ oracle.astype(np.float32).astype(np.float64)
                assert np.any(denom <= 0) or np.any(
                    np.abs(values[jj, ii] - 1.0 / denom) >= 100.0
                )
                continue
            np.testing.assert_allclose(coeffs, oracle.astype(np.float32), atol=1e-6)

    def test_noiseless_surface_reproduced(self):
        # [DERIVED] fit on exact planar-in-(i,j,1/r) data reproduces samples.
        img = image_from_surface((0.01, 0.002, 0.05), width=4, height=4)
        coeffs = fit_block(img, (0, 0), FitConfig(delta_r=1.0))
        jj, ii = np.nonzero(img.mask)
        rhat = predict_range_surface(coeffs, ii, jj)
        np.testing.assert_allclose(rhat, img.values[jj, ii], atol=1e-5)

    def test_delta_r_rejection(self, rng):
        occ = np.ones((4, 4), dtype=bool)
        values = rng.uniform(1.0, 15.0, (4, 4))
        img = RangeImage(ProjectionConfig(0.01, 0.01, 0.0, 0.0, 4, 4), values)
        assert fit_block(img, (0, 0), FitConfig(delta_r=1e-6)) is None

    def test_block_outside_grid(self):
        img = image_from_surface((0.0, 0.0, 0.1), 4, 4)
        with pytest.raises(ValueError):
            fit_block(img, (2, 0), FitConfig())


class TestPredictRangeSurface:
    def test_constant_coefficients(self):
        # [TRIVIAL] (0, 0, 0.5) -> 2.0 anywhere.
        assert predict_range_surface((0.0, 0.0, 0.5), 3, 11) == pytest.approx(2.0)

    def test_linear_in_i(self):
        # [TRIVIAL] 0.1 * 9 + 0.1 = 1.0 -> range 1.0.
        assert predict_range_surface((0.1, 0.0, 0.1), 9, 123) == pytest.approx(1.0)

    def test_nonpositive_denominator(self):
        with pytest.raises(NonPositiveDenominator):
            predict_range_surface((-0.1, 0.0, 0.1), 5, 0)

    def test_vectorized(self):
        out = predict_range_surface((0.0, 0.0, 0.1), np.arange(3), np.arange(3))
        np.testing.assert_allclose(out, [10.0, 10.0, 10.0])


class TestPredictRangePlane:
    def test_horizontal_plane(self):
        # [TRIVIAL] plane z = 5 seen straight up.
        assert predict_range_plane(0, 0, 1, -5, 0.0, np.pi / 2) == pytest.approx(5.0)

    def test_vertical_plane(self):
        # [TRIVIAL] plane x = 2 seen along +x.
        assert predict_range_plane(1, 0, 0, -2, 0.0, 0.0) == pytest.approx(2.0)

    def test_geometric_oracle(self, rng):
        # [DERIVED] the predicted point lies on the plane.
        for _ in range(200):
            n = rng.normal(0, 1, 3)
            n /= np.linalg.norm(n)
            d = rng.uniform(-20, 20)
            theta = rng.uniform(-np.pi, np.pi)
            phi = rng.uniform(-np.pi / 2, np.pi / 2)
            ray = np.array(
                [np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)]
            )
            if abs(n @ ray) < 1e-3:
                continue
            r = predict_range_plane(*n, d, theta, phi)
            assert n @ (r * ray) + d == pytest.approx(0.0, abs=1e-9)

    def test_degenerate_plane(self):
        with pytest.raises(DegeneratePlane):
            predict_range_plane(0, 0, 1, -5, 0.0, 0.0)


class TestEncodeSurfaces:
    def test_full_row_merges_into_one_tuple(self):
        # [DERIVED] one block-row on a single surface -> one run of W/B.
        img = image_from_surface((0.001, 0.0005, 0.05), width=16, height=4)
        tuples, fitted, unfit = encode_surfaces(img, FitConfig(delta_r=0.3))
        assert len(tuples) == 1
        assert (tuples[0].row, tuples[0].col, tuples[0].length) == (0, 0, 4)
        assert fitted.all()
        assert unfit.occupied_count == 0

    def test_empty_image(self):
        # [TRIVIAL]
        img = RangeImage.empty(CFG16)
        tuples, fitted, unfit = encode_surfaces(img, FitConfig(delta_r=0.3))
        assert tuples == []
        assert not fitted.any()
        assert unfit.occupied_count == 0

    def test_pure_noise_never_fits(self, rng):
        # [DERIVED] iid ranges with a tiny threshold -> everything unfit.
        img = random_range_image(ProjectionConfig.from_degrees(4.0, 4.0), 0.9, rng)
        tuples, fitted, unfit = encode_surfaces(img, FitConfig(delta_r=1e-6))
        assert tuples == []
        assert unfit.occupied_count == img.occupied_count

    def test_partition_property(self, rng):
        img = random_range_image(ProjectionConfig.from_degrees(2.0, 2.0), 0.6, rng, 5.0, 5.2)
        tuples, fitted, unfit = encode_surfaces(img, FitConfig(delta_r=0.3))
        assert not (fitted & unfit.mask).any()
        assert np.array_equal(fitted | unfit.mask, img.mask)

    def test_empty_block_closes_run(self):
        # Two fitted segments separated by an empty block stay two tuples.
        occ = np.ones((4, 16), dtype=bool)
        occ[:, 4:8] = False
        img = image_from_surface((0.001, 0.0005, 0.05), 16, 4, occ)
        tuples, _, _ = encode_surfaces(img, FitConfig(delta_r=0.3))
        assert [(t.col, t.length) for t in tuples] == [(0, 1), (2, 2)]

    def test_merge_shares_run_head_coefficients(self):
        img = image_from_surface((0.001, 0.0005, 0.05), width=32, height=4)
        tuples, _, _ = encode_surfaces(img, FitConfig(delta_r=0.3))
        # [DERIVED] every pixel of every run passes the threshold under the
        # run's shared coefficients.
        for t in tuples:
            jj, ii = np.nonzero(img.mask[:, t.col * 4 : (t.col + t.length) * 4])
            ii = ii + t.col * 4
            rhat = predict_range_surface(t.coefficients, ii, jj)
            assert np.all(np.abs(img.values[jj, ii] - rhat) < 0.3)

    def test_delta_r_soundness_random_images(self, rng):
        for _ in range(10):
            img = random_range_image(
                ProjectionConfig.from_degrees(3.0, 3.0), 0.7, rng, 4.0, 4.4
            )
            delta_r = 0.25
            tuples, fitted, _ = encode_surfaces(img, FitConfig(delta_r=delta_r))
            values, fitted_dec = decode_surfaces(
                tuples, img.mask, FitConfig(delta_r=delta_r)
            )
            assert np.array_equal(fitted, fitted_dec)
            err = np.abs(values[fitted] - img.values[fitted])
            assert err.size == 0 or err.max() < delta_r


class TestDecodeSurfaces:
    def test_zero_tuples(self):
        # [TRIVIAL]
        values, fitted = decode_surfaces([], np.ones((4, 4), bool), FitConfig())
        assert not values.any()
        assert not fitted.any()

    def test_round_trip_within_delta_r(self, rng):
        img = random_range_image(ProjectionConfig.from_degrees(2.0, 2.0), 0.8, rng, 8.0, 8.1)
        tuples, fitted, _ = encode_surfaces(img, FitConfig(delta_r=0.2))
        values, fitted_dec = decode_surfaces(tuples, img.mask, FitConfig(delta_r=0.2))
        assert np.array_equal(fitted, fitted_dec)
        assert np.all(np.abs(values[fitted] - img.values[fitted]) < 0.2)

    def test_out_of_bounds_tuple_rejected(self):
        occ = np.ones((4, 16), bool)
        bad = SurfaceTuple(0, 3, 2, (0.0, 0.0, 0.1))  # col 3 + len 2 > 4 blocks
        with pytest.raises(MalformedTuple):
            decode_surfaces([bad], occ, FitConfig())

    def test_nonpositive_surface_rejected(self):
        occ = np.ones((4, 4), bool)
        bad = SurfaceTuple(0, 0, 1, (-1.0, 0.0, 0.5))
        with pytest.raises(MalformedTuple):
            decode_surfaces([bad], occ, FitConfig())

    def test_fitted_mask_pure_function(self, rng):
        img = random_range_image(ProjectionConfig.from_degrees(2.0, 2.0), 0.7, rng, 5.0, 5.1)
        tuples, fitted, _ = encode_surfaces(img, FitConfig(delta_r=0.3))
        assert np.array_equal(fitted, fitted_mask_from_tuples(img.mask, tuples, 4))


class TestPlaneModelPath:
    def test_plane_model_fits_synthetic_wall(self):
        # A wall at y = 10 seen around theta = +90 deg.
        cfg = ProjectionConfig.from_degrees(0.5, 0.5)
        jj, ii = np.meshgrid(np.arange(cfg.height), np.arange(cfg.width), indexing="ij")
        theta = (ii + 0.5) * cfg.delta_theta - cfg.h_offset
        phi = (jj + 0.5) * cfg.delta_phi - cfg.v_offset
        denom = np.cos(phi) * np.sin(theta)
        with np.errstate(divide="ignore"):
            r = np.where(denom > 0.5, 10.0 / denom, 0.0)
        img = RangeImage(cfg, r)
        tuples, fitted, _ = encode_surfaces(
            img, FitConfig(delta_r=0.05), model="plane"
        )
        assert fitted.sum() > 0.9 * img.occupied_count
        values, _ = decode_surfaces(
            tuples, img.mask, FitConfig(delta_r=0.05), cfg, model="plane"
        )
        assert np.all(np.abs(values[fitted] - img.values[fitted]) < 0.05)

    def test_plane_model_requires_config(self):
        img = image_from_surface((0.0, 0.0, 0.1), 4, 4)
        run = SurfaceTuple(0, 0, 1, (0.0, 0.0, 1.0, -5.0))
        with pytest.raises(ValueError):
            decode_surfaces([run], img.mask, FitConfig(), projection=None, model="plane")
        with pytest.raises(ValueError):
            encode_surfaces(
                RangeImage(ProjectionConfig(0.01, 0.01, 0, 0, 4, 4), img.values),
                FitConfig(),
                model="nonsense",
            )

    def test_plane_fit_on_true_points(self, rng):
        cloud = rng.normal(0, 12, (4000, 3))
        cfg = ProjectionConfig.from_degrees(1.0, 1.0)
        img, _, sources = project_with_sources(cloud, cfg)
        pts = np.where(sources[:, :, None] >= 0, cloud[sources], np.nan)
        tuples, fitted, _ = encode_surfaces(
            img, FitConfig(delta_r=0.5), model="plane", fit_points=pts
        )
        # The call runs and the soundness guarantee still holds.
        values, fitted_dec = decode_surfaces(
            tuples, img.mask, FitConfig(delta_r=0.5), cfg, model="plane"
        )
        assert np.array_equal(fitted, fitted_dec)
        err = np.abs(values[fitted] - img.values[fitted])
        assert err.size == 0 or err.max() < 0.5


class TestFitConfigValidation:
    def test_invalid(self):
        with pytest.raises(ValueError):
            FitConfig(block_size=1)
        with pytest.raises(ValueError):
            FitConfig(delta_r=0.0)
        with pytest.raises(ValueError):
            FitConfig(min_points=2)
