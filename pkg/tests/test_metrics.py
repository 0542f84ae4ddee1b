"""Tests for distortion metrics and BD-rate."""

import math

import numpy as np
import pytest

from hpsr.container import BitAllocation
from hpsr.errors import MetricError
from hpsr.geometry import VoxelCloud
from hpsr.metrics import (
    NormalField,
    RdPoint,
    bd_rate,
    d1_mse,
    d2_mse,
    estimate_normals,
    evaluate,
    point_to_plane_mse,
    point_to_point_mse,
    psnr,
)

UP = np.array([[0.0, 0.0, 1.0]])


def _curve(rates, psnrs):
    return [RdPoint(bpp=r, d1_psnr=p) for r, p in zip(rates, psnrs)]


ANCHOR = _curve([0.1, 0.2, 0.4, 0.8, 1.6], [50.0, 55.0, 59.0, 62.0, 64.0])


class TestD1:
    """Tests for point-to-point distortion."""

    def test_identity(self, make_random_cloud):
        cloud = make_random_cloud(81, 6, 300)
        assert d1_mse(cloud, cloud) == 0.0

    def test_singleton_shift(self):
        assert d1_mse(np.array([[0, 0, 0]]), np.array([[1, 0, 0]])) == 1.0

    def test_asymmetric_example(self):
        assert d1_mse(np.array([[0, 0, 0]]), np.array([[0, 0, 0], [3, 0, 0]])) == 4.5

    def test_symmetric(self, make_random_cloud):
        a, b = make_random_cloud(82, 6, 200), make_random_cloud(83, 6, 150)
        assert d1_mse(a, b) == d1_mse(b, a)
        assert d1_mse(a, b) > 0

    def test_matches_brute_force(self, make_random_cloud):
        a, b = make_random_cloud(84, 7, 500), make_random_cloud(85, 7, 2000)
        src, ref = a.points.astype(float), b.points.astype(float)
        squared = ((src[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        assert point_to_point_mse(a, b) == pytest.approx(squared.mean(), rel=1e-12)

    def test_empty(self):
        with pytest.raises(MetricError, match="empty cloud"):
            d1_mse(np.empty((0, 3)), np.array([[0, 0, 0]]))
        with pytest.raises(MetricError, match="empty cloud"):
            d1_mse(VoxelCloud([(1, 1, 1)], 2), VoxelCloud(np.empty((0, 3)), 2))


class TestD2:
    """Tests for point-to-plane distortion."""

    def test_orthogonal_error_vanishes(self):
        a, b = np.array([[0, 0, 0]]), np.array([[1, 0, 0]])
        assert d2_mse(a, b, UP, UP) == 0.0

    def test_parallel_error_kept(self):
        a, b = np.array([[0, 0, 0]]), np.array([[0, 0, 2]])
        assert d2_mse(a, b, UP, UP) == 4.0

    def test_uses_reference_normals(self):
        a, b = np.array([[0, 0, 0]]), np.array([[1, 0, 0]])
        side = np.array([[1.0, 0.0, 0.0]])
        assert point_to_plane_mse(a, b, side) == 1.0
        assert point_to_plane_mse(a, b, UP) == 0.0
        assert d2_mse(a, b, UP, side) == 1.0

    def test_never_above_d1(self):
        rng = np.random.default_rng(86)
        for _ in range(50):
            a = rng.integers(0, 64, size=(40, 3))
            b = rng.integers(0, 64, size=(40, 3))
            normals = estimate_normals(b, 6)
            assert point_to_plane_mse(a, b, normals) <= point_to_point_mse(a, b) + 1e-9

    def test_missing_normals(self):
        with pytest.raises(MetricError, match="normals"):
            d2_mse(np.array([[0, 0, 0]]), np.array([[1, 0, 0]]), UP, None)

    def test_normal_count_mismatch(self):
        with pytest.raises(MetricError):
            point_to_plane_mse(np.array([[0, 0, 0]]), np.array([[1, 0, 0], [2, 0, 0]]), UP)


class TestNormals:
    """Tests for PCA normal estimation."""

    def test_plane(self):
        axis = np.arange(10)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        plane = np.column_stack([xx.ravel(), yy.ravel(), np.full(100, 4)])
        field = estimate_normals(plane, 12)
        assert field.degenerate == 0
        assert np.allclose(field.normals, [0.0, 0.0, 1.0])

    def test_unit_length(self, small_sphere):
        field = estimate_normals(small_sphere)
        assert len(field) == len(small_sphere)
        assert np.allclose(np.linalg.norm(field.normals, axis=1), 1.0)

    def test_sphere_normals_are_radial(self, small_sphere):
        field = estimate_normals(small_sphere)
        radial = small_sphere.points - small_sphere.points.mean(axis=0)
        radial = radial / np.linalg.norm(radial, axis=1, keepdims=True)
        alignment = np.abs(np.sum(radial * field.normals, axis=1))
        assert np.median(alignment) > 0.9

    def test_collinear_is_degenerate(self):
        line = np.column_stack([np.arange(20), np.zeros(20), np.zeros(20)])
        field = estimate_normals(line, 4)
        assert field.degenerate == 20
        assert np.array_equal(field.normals, np.tile([0.0, 0.0, 1.0], (20, 1)))

    def test_orientation(self):
        axis = np.arange(8)
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        wall = np.column_stack([np.full(64, 3), yy.ravel(), zz.ravel()])
        field = estimate_normals(wall, 8)
        assert np.allclose(field.normals, [1.0, 0.0, 0.0])

    def test_preconditions(self):
        points = np.arange(30).reshape(10, 3)
        with pytest.raises(MetricError):
            estimate_normals(points, 2)
        with pytest.raises(MetricError):
            estimate_normals(points, 10)


class TestPSNR:
    """Tests for the PSNR conversion."""

    def test_reference_value(self):
        assert psnr(1.0, 10) == pytest.approx(64.97, abs=0.01)

    def test_peak_mse_is_zero_db(self):
        assert psnr(3 * 1023**2, 10) == 0.0

    def test_zero_mse(self):
        assert psnr(0.0, 10) == math.inf

    def test_decreasing(self):
        values = [psnr(m, 8) for m in (0.5, 1.0, 2.0, 10.0)]
        assert values == sorted(values, reverse=True)

    def test_negative(self):
        with pytest.raises(MetricError):
            psnr(-1.0, 8)


class TestBDRate:
    """Tests for Bjontegaard-delta rate."""

    def test_identical_curves(self):
        assert bd_rate(ANCHOR, ANCHOR) == pytest.approx(0.0, abs=1e-9)

    def test_doubled_rate(self):
        doubled = _curve([2 * p.bpp for p in ANCHOR], [p.d1_psnr for p in ANCHOR])
        assert bd_rate(ANCHOR, doubled) == pytest.approx(100.0, abs=1e-6)

    def test_swap_identity(self):
        other = _curve([1.3 * p.bpp for p in ANCHOR], [p.d1_psnr + 0.5 for p in ANCHOR])
        forward = bd_rate(ANCHOR, other)
        backward = bd_rate(other, ANCHOR)
        assert (1 + forward / 100) * (1 + backward / 100) == pytest.approx(1.0, abs=1e-9)

    def test_better_test_curve_is_negative(self):
        cheaper = _curve([0.8 * p.bpp for p in ANCHOR], [p.d1_psnr for p in ANCHOR])
        assert bd_rate(ANCHOR, cheaper) == pytest.approx(-20.0, abs=1e-6)

    def test_too_few_points(self):
        with pytest.raises(MetricError, match="at least 4"):
            bd_rate(ANCHOR[:3], ANCHOR)

    def test_no_overlap(self):
        far = _curve([p.bpp for p in ANCHOR], [p.d1_psnr + 100 for p in ANCHOR])
        with pytest.raises(MetricError, match="no overlap"):
            bd_rate(ANCHOR, far)

    def test_non_finite_points_dropped(self):
        padded = ANCHOR + [RdPoint(bpp=3.2, d1_psnr=math.inf)]
        assert bd_rate(padded, ANCHOR) == pytest.approx(0.0, abs=1e-9)

    def test_repeated_rate_rejected(self):
        repeated = ANCHOR + [RdPoint(bpp=1.6, d1_psnr=64.5)]
        with pytest.raises(MetricError, match="strictly increasing"):
            bd_rate(repeated, ANCHOR)

    def test_d2_needs_d2_values(self):
        with pytest.raises(MetricError):
            bd_rate(ANCHOR, ANCHOR, which="d2")


class TestEvaluate:
    """Tests for the combined RD evaluation."""

    def test_rate_and_distortion(self):
        reference = np.array([[0, 0, 0], [2, 0, 0]])
        test = np.array([[0, 0, 0], [3, 0, 0]])
        allocation = BitAllocation(header_bits=192, base_bits=64, prior_bits=8)
        point = evaluate(reference, test, 10, allocation=allocation, rate_id="r0")
        assert point.bpp == 132.0
        assert point.d1_psnr == pytest.approx(psnr(0.5, 10))
        assert math.isnan(point.d2_psnr)
        assert (point.base_bits, point.prior_bits, point.header_bits) == (64, 8, 192)
        assert point.rate_id == "r0"

    def test_with_d2(self):
        reference = np.array([[0, 0, 0]])
        test = np.array([[1, 0, 0]])
        point = evaluate(reference, test, 10, reference_normals=NormalField(UP),
                         test_normals=NormalField(UP), with_d2=True)
        assert point.d2_psnr == math.inf
        assert point.bpp == 0.0

    def test_with_d2_requires_normals(self):
        with pytest.raises(MetricError):
            evaluate(np.array([[0, 0, 0]]), np.array([[1, 0, 0]]), 10, with_d2=True)
