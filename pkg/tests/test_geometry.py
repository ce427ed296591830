"""Camera model, plane primitives, least-squares and RANSAC plane fitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planedepth.exceptions import (
    DegenerateRayError,
    InvalidInputError,
    NoConsensusError,
    RankDeficientError,
)
from planedepth.geometry import (
    CameraIntrinsics,
    PixelDepth,
    Plane,
    Point3,
    backproject,
    canonical_normal,
    fit_plane_lsq,
    plane_depth_at,
    point_plane_distance,
    points_plane_distance,
    ransac_plane,
)


class TestBackproject:
    def test_principal_point(self, k500):
        p = backproject(PixelDepth(k500.c_x, k500.c_y, 5.0), k500)
        assert (p.x, p.y, p.z) == (0.0, 0.0, 5.0)

    def test_one_focal_length_right(self, k500):
        p = backproject(PixelDepth(k500.c_x + k500.f, k500.c_y, 2.0), k500)
        assert (p.x, p.y, p.z) == (2.0, 0.0, 2.0)

    def test_off_axis(self, k500):
        p = backproject(PixelDepth(k500.c_x + 100, k500.c_y - 50, 10.0), k500)
        assert np.allclose([p.x, p.y, p.z], [2.0, -1.0, 10.0])

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(InvalidInputError):
            PixelDepth(10.0, 10.0, 0.0)

    @given(
        u=st.floats(0, 640),
        v=st.floats(0, 480),
        z=st.floats(0.1, 100),
    )
    def test_reprojects_to_same_pixel(self, u, v, z):
        k = CameraIntrinsics(500.0, 320.0, 240.0)
        p = backproject(PixelDepth(u, v, z), k)
        assert p.z == z
        assert np.isclose(k.f * p.x / p.z + k.c_x, u, atol=1e-9)
        assert np.isclose(k.f * p.y / p.z + k.c_y, v, atol=1e-9)


class TestPlane:
    def test_canonical_sign_prefers_positive_nz(self):
        p = Plane(np.array([0.0, 0.0, -1.0]), 10.0)
        assert np.allclose(p.normal, [0, 0, 1])
        assert p.offset == -10.0

    def test_canonical_tie_breaks_on_ny_then_nx(self):
        n, off = canonical_normal(np.array([0.0, -1.0, 0.0]), 2.0)
        assert np.allclose(n, [0, 1, 0]) and off == -2.0
        n, off = canonical_normal(np.array([-1.0, 0.0, 0.0]), 2.0)
        assert np.allclose(n, [1, 0, 0]) and off == -2.0

    def test_normalizes_input(self):
        p = Plane(np.array([0.0, 0.0, 4.0]), -8.0)
        assert np.allclose(p.normal, [0, 0, 1]) and p.offset == -2.0

    def test_sign_flipped_planes_compare_equal(self):
        a = Plane(np.array([0.0, 1.0, 1.0]), -3.0)
        b = Plane(-np.array([0.0, 1.0, 1.0]), 3.0)
        assert a == b

    def test_zero_normal_rejected(self):
        with pytest.raises(InvalidInputError):
            Plane(np.zeros(3), 1.0)


class TestPlaneDepthAt:
    def test_front_parallel_constant(self, k500):
        s = Plane(np.array([0.0, 0.0, 1.0]), -10.0)
        for u, v in [(0, 0), (320, 120), (639, 239), (100, 200)]:
            assert plane_depth_at(s, u, v, k500) == pytest.approx(10.0, abs=1e-12)

    def test_slanted_plane_matches_ray_intersection(self, k500):
        s = Plane(np.array([0.1, 0.5, 1.0]), -7.0)
        for u, v in [(10, 10), (320, 120), (500, 30), (123, 222)]:
            ray = k500.ray(u, v)
            expected = -s.offset / float(s.normal @ ray)
            assert plane_depth_at(s, u, v, k500) == pytest.approx(expected, abs=1e-9)
            # The intersection point indeed lies on the plane.
            pt = ray * expected
            assert abs(s.normal @ pt + s.offset) < 1e-9

    def test_parallel_ray_raises(self, k500):
        # Vertical plane seen edge-on from the principal ray.
        s = Plane(np.array([0.0, 1.0, 0.0]), -1.5)
        with pytest.raises(DegenerateRayError):
            plane_depth_at(s, k500.c_x, k500.c_y, k500)

    def test_behind_camera_is_negative(self, k500):
        s = Plane(np.array([0.0, 0.0, 1.0]), 10.0)  # z = -10
        assert plane_depth_at(s, 320, 120, k500) < 0


class TestFitPlaneLsq:
    def test_three_points_exact(self):
        pts = [Point3(0, 0, 1), Point3(1, 0, 1.5), Point3(0, 1, 2.0)]
        plane = fit_plane_lsq(pts)
        for p in pts:
            assert point_plane_distance(p, plane) < 1e-12

    def test_constant_depth_recovers_front_parallel(self):
        rng = np.random.default_rng(0)
        pts = np.column_stack([rng.uniform(-3, 3, 30), rng.uniform(-3, 3, 30),
                               np.full(30, 7.0)])
        plane = fit_plane_lsq(pts)
        assert np.allclose(plane.normal, [0, 0, 1], atol=1e-12)
        assert plane.offset == pytest.approx(-7.0, abs=1e-12)

    def test_noisy_plane_recovered(self):
        # 50 points on x + 2y + 3z = 4 with sigma = 1e-3 noise.
        rng = np.random.default_rng(1)
        x = rng.uniform(-5, 5, 50)
        y = rng.uniform(-5, 5, 50)
        z = (4.0 - x - 2.0 * y) / 3.0
        pts = np.column_stack([x, y, z]) + rng.normal(0, 1e-3, (50, 3))
        plane = fit_plane_lsq(pts)
        truth = Plane(np.array([1.0, 2.0, 3.0]), -4.0)
        assert np.allclose(plane.normal, truth.normal, atol=1e-2)
        assert plane.offset == pytest.approx(truth.offset, abs=1e-2)

    def test_collinear_points_raise(self):
        pts = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]], float)
        with pytest.raises(RankDeficientError):
            fit_plane_lsq(pts)

    def test_too_few_points_raise(self):
        with pytest.raises(RankDeficientError):
            fit_plane_lsq(np.array([[0, 0, 0], [1, 0, 0]], float))

    @settings(max_examples=30)
    @given(st.integers(0, 10**6))
    def test_exact_fit_on_random_planar_points(self, seed):
        rng = np.random.default_rng(seed)
        normal = rng.normal(size=3)
        while np.linalg.norm(normal) < 1e-3:
            normal = rng.normal(size=3)
        truth = Plane(normal, float(rng.normal()))
        # Points spanning the plane: centroid + two tangent directions.
        t = np.linalg.svd(truth.normal[None, :])[2][1:]
        coeffs = rng.uniform(-4, 4, (12, 2))
        pts = -truth.offset * truth.normal + coeffs @ t
        fitted = fit_plane_lsq(pts)
        assert np.allclose(fitted.normal, truth.normal, atol=1e-8)
        assert fitted.offset == pytest.approx(truth.offset, abs=1e-7)


class TestPointPlaneDistance:
    def test_worked_example(self):
        s = Plane(np.array([0.0, 1.0, 0.0]), -1.5)
        assert point_plane_distance(Point3(0, 3, 0), s) == pytest.approx(1.5)

    def test_point_on_plane(self):
        s = Plane(np.array([0.0, 0.0, 1.0]), -10.0)
        assert point_plane_distance(Point3(5, -2, 10), s) == 0.0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        s = Plane(rng.normal(size=3), float(rng.normal()))
        pts = rng.normal(size=(20, 3))
        vec = points_plane_distance(pts, s)
        for row, d in zip(pts, vec):
            assert point_plane_distance(row, s) == pytest.approx(d, abs=1e-12)


class TestRansacPlane:
    def make_plane_cloud(self, rng, n_in=100, n_out=10):
        x = rng.uniform(-10, 10, n_in)
        z = rng.uniform(4, 40, n_in)
        inliers = np.column_stack([x, np.full(n_in, 1.5), z])
        inliers += rng.normal(0, 0.02, inliers.shape)
        outliers = rng.uniform(-10, 10, (n_out, 3))
        return np.vstack([inliers, outliers])

    def test_recovers_horizontal_plane(self):
        rng = np.random.default_rng(7)
        pts = self.make_plane_cloud(rng)
        plane, mask = ransac_plane(pts, inlier_tol=0.15, iters=200, rng_seed=0)
        assert np.allclose(plane.normal, [0, 1, 0], atol=0.01)
        assert plane.offset == pytest.approx(-1.5, abs=0.05)
        assert mask[:100].sum() >= 100

    def test_all_coplanar_all_inliers(self):
        rng = np.random.default_rng(8)
        pts = np.column_stack([rng.uniform(-5, 5, 40), rng.uniform(-5, 5, 40),
                               np.zeros(40)])
        pts[:, 2] = 2.0 + 0.5 * pts[:, 0]
        plane, mask = ransac_plane(pts, inlier_tol=0.05, rng_seed=1)
        assert mask.all()

    def test_three_points_interpolating(self):
        pts = np.array([[0, 0, 1], [1, 0, 2], [0, 1, 3]], float)
        plane, mask = ransac_plane(pts, inlier_tol=0.01, rng_seed=0)
        assert mask.all()
        assert points_plane_distance(pts, plane).max() < 1e-9

    def test_too_few_points_raise(self):
        with pytest.raises(RankDeficientError):
            ransac_plane(np.zeros((2, 3)), inlier_tol=0.1)

    def test_degenerate_cloud_raises(self):
        pts = np.repeat(np.array([[1.0, 2.0, 3.0]]), 10, axis=0)
        with pytest.raises(NoConsensusError):
            ransac_plane(pts, inlier_tol=0.1)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(9)
        pts = self.make_plane_cloud(rng)
        a = ransac_plane(pts, 0.15, rng_seed=42)
        b = ransac_plane(pts, 0.15, rng_seed=42)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])
