import json

import numpy as np
import pytest
from conftest import inscribed_polygon_area, loglog_slope, mean_edge
from hypothesis import given
from hypothesis import strategies as st

from extremal import TriMesh, TriMeshMap, build_disk_mesh, dbar_residual, wirtinger
from extremal.io import dumps
from extremal.mesh import MeshError, PointLocationError, locate, map_from_dict, map_to_dict

coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def fd_wirtinger(func, z0, h=1e-6):
    """Central differences in x and y, combined into d/dz and d/dzbar."""
    fx = (func(z0 + h) - func(z0 - h)) / (2 * h)
    fy = (func(z0 + 1j * h) - func(z0 - 1j * h)) / (2 * h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


class TestBuildDiskMesh:
    def test_smallest_mesh(self):
        m = build_disk_mesh(8, 0)
        assert len(m.boundary_loop) == 8
        assert m.n_triangles >= 8
        assert np.all(m.areas > 0)

    def test_boundary_doubles(self):
        assert len(build_disk_mesh(8, 2).boundary_loop) == 32

    @pytest.mark.parametrize("r", [0, 1, 2, 3])
    def test_area_is_inscribed_polygon(self, r):
        # every interior vertex lies inside the boundary polygon, so the
        # triangles tile it exactly
        m = build_disk_mesh(16, r)
        n = 16 * 2**r
        assert m.areas.sum() == pytest.approx(inscribed_polygon_area(n), rel=1e-13)

    def test_area_approaches_pi(self):
        areas = [build_disk_mesh(16, r).areas.sum() for r in range(4)]
        assert abs(areas[3] - np.pi) <= 1e-2
        assert np.all(np.diff(areas) > 0)
        assert np.all(np.asarray(areas) < np.pi)

    def test_diameter_halves(self):
        d = [build_disk_mesh(16, r).diameters().max() for r in range(1, 5)]
        ratios = np.asarray(d[1:]) / np.asarray(d[:-1])
        assert np.all((ratios > 0.4) & (ratios < 0.6))

    def test_invariants(self, mesh3):
        mesh3.check()
        zb = mesh3.vertices[mesh3.boundary_loop]
        assert np.max(np.abs(np.abs(zb) - 1)) <= 1e-12
        steps = np.mod(np.diff(np.angle(zb)), 2 * np.pi)
        assert np.all(steps > 0)

    def test_conforming(self, mesh2):
        t = mesh2.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        assert set(counts.tolist()) == {1, 2}
        assert np.sum(counts == 1) == len(mesh2.boundary_loop)

    @pytest.mark.parametrize("args", [(7, 0), (8, -1), (8.5, 1)])
    def test_rejects_bad_parameters(self, args):
        with pytest.raises(ValueError):
            build_disk_mesh(*args)

    def test_check_catches_flipped_triangle(self, mesh2):
        tris = mesh2.triangles.copy()
        tris[0] = tris[0, [0, 2, 1]]
        with pytest.raises(MeshError):
            TriMesh(mesh2.vertices, tris, mesh2.boundary_loop).check()


class TestWirtinger:
    def test_identity(self, mesh2):
        d = wirtinger(TriMeshMap(mesh2, mesh2.vertices), 5)
        assert d.f_z == pytest.approx(1, abs=1e-13)
        assert d.f_zbar == pytest.approx(0, abs=1e-13)
        assert d.jacobian == pytest.approx(1, abs=1e-13)

    def test_conjugate(self, mesh2):
        d = wirtinger(TriMeshMap(mesh2, np.conj(mesh2.vertices)), 17)
        assert d.f_z == pytest.approx(0, abs=1e-13)
        assert d.f_zbar == pytest.approx(1, abs=1e-13)
        assert d.jacobian == pytest.approx(-1, abs=1e-13)

    def test_shear_against_finite_differences(self, mesh2):
        func = lambda z: z + 0.25 * np.conj(z)
        fz_ref, fzb_ref = fd_wirtinger(func, 0.1 + 0.2j)
        d = wirtinger(TriMeshMap.from_function(mesh2, func), 40)
        assert d.f_z == pytest.approx(fz_ref, abs=1e-8)
        assert d.f_zbar == pytest.approx(fzb_ref, abs=1e-8)
        assert d.jacobian == pytest.approx(0.9375, abs=1e-12)

    @given(a=coef, b=coef, c=coef)
    def test_exact_on_affine_maps(self, mesh2, a, b, c):
        fz, fzb = TriMeshMap(mesh2, a + b * mesh2.vertices + c * np.conj(mesh2.vertices)).derivatives()
        scale = 1 + abs(a) + abs(b) + abs(c)
        assert np.max(np.abs(fz - b)) <= 1e-12 * scale
        assert np.max(np.abs(fzb - c)) <= 1e-12 * scale

    def test_jacobian_matches_derivatives(self, mesh2, rng):
        w = mesh2.vertices + 0.01 * (rng.normal(size=mesh2.n_vertices) + 1j * rng.normal(size=mesh2.n_vertices))
        fmap = TriMeshMap(mesh2, w)
        for t in (0, 100, 500):
            d = wirtinger(fmap, t)
            assert d.jacobian == abs(d.f_z) ** 2 - abs(d.f_zbar) ** 2

    def test_jacobian_is_image_area_ratio(self, mesh2, rng):
        w = mesh2.vertices + 0.01 * (rng.normal(size=mesh2.n_vertices) + 1j * rng.normal(size=mesh2.n_vertices))
        fmap = TriMeshMap(mesh2, w)
        np.testing.assert_allclose(fmap.jacobians(), fmap.image_areas / mesh2.areas, rtol=1e-10)

    def test_bad_triangle_id(self, mesh2):
        with pytest.raises(IndexError):
            wirtinger(TriMeshMap(mesh2, mesh2.vertices), mesh2.n_triangles)

    def test_degenerate_domain_triangle(self):
        mesh = TriMesh([0, 1, 2], [[0, 1, 2]], [0, 1, 2])
        with pytest.raises(MeshError):
            wirtinger(TriMeshMap(mesh, mesh.vertices), 0)


class TestDbarResidual:
    def test_square_converges_first_order(self):
        hs, l1 = [], []
        for r in range(1, 5):
            m = build_disk_mesh(16, r)
            hs.append(mean_edge(m))
            l1.append(dbar_residual(m.vertices**2, m)[1])
        assert np.all(np.diff(l1) < 0)
        assert loglog_slope(hs, l1) >= 0.95

    def test_conjugate_gives_area(self, mesh3):
        res, l1 = dbar_residual(np.conj(mesh3.vertices), mesh3)
        assert np.max(np.abs(res - 1)) <= 1e-12
        assert l1 == pytest.approx(mesh3.areas.sum(), rel=1e-13)
        assert abs(l1 - np.pi) <= 2e-3

    def test_constant(self, mesh2):
        res, l1 = dbar_residual(np.full(mesh2.n_vertices, 2 - 1j), mesh2)
        assert np.all(res == 0) and l1 == 0

    @given(a=coef, b=coef)
    def test_affine_holomorphic_vanishes(self, mesh2, a, b):
        res, l1 = dbar_residual(a + b * mesh2.vertices, mesh2)
        assert np.max(np.abs(res)) <= 1e-12 * (1 + abs(a) + abs(b))

    def test_shape_checked(self, mesh2):
        with pytest.raises(ValueError):
            dbar_residual(np.zeros(3), mesh2)


class TestMapsAndLocation:
    def test_orientation_flags(self, mesh2):
        fmap = TriMeshMap(mesh2, np.conj(mesh2.vertices))
        assert np.all(fmap.orientation_flag == -1)
        assert not fmap.orientation_preserving
        assert TriMeshMap(mesh2, mesh2.vertices).orientation_preserving

    def test_evaluation_reproduces_affine(self, mesh2, rng):
        fmap = TriMeshMap(mesh2, 0.5 + 2j * mesh2.vertices - 0.3 * np.conj(mesh2.vertices))
        p = 0.9 * np.sqrt(rng.uniform(size=50)) * np.exp(2j * np.pi * rng.uniform(size=50))
        np.testing.assert_allclose(fmap(p), 0.5 + 2j * p - 0.3 * np.conj(p), atol=1e-12)

    def test_locate_outside_hull(self, mesh2):
        with pytest.raises(PointLocationError):
            locate(mesh2, [1.5 + 0j])

    def test_locate_barycentric(self, mesh2):
        c = mesh2.centroids[:20]
        tri, bary = locate(mesh2, c)
        np.testing.assert_array_equal(tri, np.arange(20))
        np.testing.assert_allclose(bary, 1 / 3, atol=1e-12)

    def test_serialization_roundtrip(self, mesh2):
        fmap = TriMeshMap(mesh2, mesh2.vertices * np.exp(0.3j) / 3)
        doc = json.loads(dumps(map_to_dict(fmap)))
        back = map_from_dict(doc)
        np.testing.assert_array_equal(back.image, fmap.image)
        np.testing.assert_array_equal(back.mesh.vertices, mesh2.vertices)
        np.testing.assert_array_equal(back.mesh.triangles, mesh2.triangles)
        assert set(doc) >= {"vertices", "triangles", "image", "boundary_loop"}

    def test_image_shape_checked(self, mesh2):
        with pytest.raises(ValueError):
            TriMeshMap(mesh2, np.zeros(4))
