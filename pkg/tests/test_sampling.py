import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import viewplan as vp
from viewplan.errors import ValidationError


def flat_mesh(side=100.0):
    return vp.TriMesh(
        np.array([[0, 0, 0], [side, 0, 0], [side, side, 0], [0, side, 0]], dtype=float),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )


class TestCameraModel:
    def test_footprint(self):
        cam = vp.CameraModel(fov=math.pi / 2, view_distance=80.0, max_range=160.0)
        assert cam.footprint == pytest.approx(160.0)

    @pytest.mark.parametrize("kwargs", [
        dict(fov=0.0, view_distance=80, max_range=160),
        dict(fov=math.pi, view_distance=80, max_range=160),
        dict(fov=1.0, view_distance=0.0, max_range=160),
        dict(fov=1.0, view_distance=200, max_range=160),
        dict(fov=1.0, view_distance=80, max_range=160, max_incidence=2.0),
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            vp.CameraModel(**kwargs)


class TestDiskRadius:
    def test_fov_right_angle_identity(self):
        # tan(pi/4) = 1, so the footprint is exactly twice the standoff.
        cam = vp.CameraModel(fov=math.pi / 2, view_distance=80.0, max_range=160.0)
        p = vp.disk_radius(cam, 0.85)
        assert p.footprint == pytest.approx(160.0, abs=1e-9)
        assert p.disk_radius == pytest.approx(24.0, abs=1e-9)

    def test_hand_case(self):
        cam = vp.CameraModel(fov=math.pi / 3, view_distance=100.0, max_range=200.0)
        p = vp.disk_radius(cam, 0.8)
        assert p.disk_radius == pytest.approx(23.094010767585033, abs=1e-9)

    def test_overlap_range(self):
        cam = vp.CameraModel(fov=1.0, view_distance=55.0, max_range=110.0)
        with pytest.raises(ValidationError):
            vp.disk_radius(cam, 1.0)
        assert vp.disk_radius(cam, 0.0).disk_radius == pytest.approx(cam.footprint)


class TestPoissonSample:
    def test_minimum_distance_invariant(self):
        mesh = flat_mesh()
        s = vp.poisson_sample(mesh, radius=8.0, seed=1)
        d = np.linalg.norm(s.positions[:, None] - s.positions[None], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 8.0

    def test_deterministic_per_seed(self):
        mesh = flat_mesh()
        a = vp.poisson_sample(mesh, radius=8.0, seed=42)
        b = vp.poisson_sample(mesh, radius=8.0, seed=42)
        c = vp.poisson_sample(mesh, radius=8.0, seed=43)
        assert np.array_equal(a.positions, b.positions)
        assert not np.array_equal(a.positions, c.positions)

    def test_count_bounds_on_flat_plane(self):
        # Disk packing brackets the count: at most area / (pi (r/2)^2)
        # disjoint half-radius disks, and maximality keeps it near dense.
        mesh = flat_mesh(100.0)
        s = vp.poisson_sample(mesh, radius=10.0, seed=5)
        upper = mesh.area / (math.pi * 5.0 ** 2)
        assert len(s) <= upper
        assert len(s) >= 0.3 * upper

    def test_normals_follow_source_triangles(self, two_building_mesh):
        s = vp.poisson_sample(two_building_mesh, radius=10.0, seed=2)
        assert np.allclose(s.normals, two_building_mesh.normals[s.triangle_ids])
        # Walls must be sampled too, not just horizontal faces.
        assert (np.abs(s.normals[:, 2]) < 0.5).any()

    def test_samples_lie_on_surface(self, two_building_mesh):
        from viewplan.scene import point_triangle_distance
        s = vp.poisson_sample(two_building_mesh, radius=12.0, seed=9)
        corners = two_building_mesh.corners()
        for i in range(len(s)):
            d = point_triangle_distance(s.positions[i][None], *corners[s.triangle_ids[i]])
            assert d[0] < 1e-9

    def test_invalid_radius(self):
        with pytest.raises(ValidationError):
            vp.poisson_sample(flat_mesh(), radius=0.0, seed=0)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_min_distance_holds_for_any_seed(self, seed):
        mesh = flat_mesh(60.0)
        s = vp.poisson_sample(mesh, radius=12.0, seed=seed)
        d = np.linalg.norm(s.positions[:, None] - s.positions[None], axis=2)
        np.fill_diagonal(d, np.inf)
        assert len(s) >= 1
        assert d.min() >= 12.0
