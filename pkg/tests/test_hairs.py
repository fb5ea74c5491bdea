import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import connected_components

from extremal.hairs import (
    CollapseSpec,
    collapse_map,
    default_collapse_tol,
    default_probes,
    detect_hairs,
    hyperbolic_diameter,
    ray_vertices,
    tip_measure,
)
from extremal.mesh import OrientationError, TriMeshMap, build_disk_mesh
from extremal.solver import harmonic_extension


def rings(mesh):
    return int(round(1 / np.abs(mesh.vertices[ray_vertices(mesh, 0)][1])))


def expected_fiber(mesh, length):
    """Ring vertices on a radius with |z| >= 1 - length (rings are equally spaced)."""
    n = rings(mesh)
    k = np.arange(n + 1)
    return int(np.sum(k / n >= 1 - length - 1e-12))


def connected(mesh, verts):
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[verts] = True
    e = mesh.edges[inside[mesh.edges[:, 0]] & inside[mesh.edges[:, 1]]]
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(mesh.n_vertices,) * 2)
    _, lab = connected_components(g, directed=False)
    return len(np.unique(lab[verts])) == 1


AXES = [(1.0, np.pi), (1j, -np.pi / 2), (-1.0, 0.0), (-1j, np.pi / 2)]


@pytest.fixture(scope="module")
def three_hairs():
    m = build_disk_mesh(16, 2)
    specs = [CollapseSpec(1.0, np.pi, 0.4, support=0.6), CollapseSpec(-1.0, 0, 0.4, support=0.6),
             CollapseSpec(1j, -np.pi / 2, 0.2, support=0.35)]
    return collapse_map(m, specs)


# --- synthetic collapses ---------------------------------------------------


@pytest.mark.parametrize("refinement", [2, 3, 4])
def test_single_hair_on_half_radius(refinement):
    m = build_disk_mesh(16, refinement)
    h = collapse_map(m, CollapseSpec(1.0, np.pi, 0.5))
    rep = detect_hairs(h)
    assert len(rep) == 1
    hair = rep.hairs[0]
    ray = ray_vertices(m, 0)
    assert set(hair.fiber_vertices) == set(ray[np.abs(m.vertices[ray]) >= 0.5 - 1e-12])
    assert len(hair.fiber_vertices) == expected_fiber(m, 0.5)
    assert hair.tip == 1.0 and hair.boundary_vertices == 1
    assert hair.image_point == pytest.approx(1.0, abs=1e-12)
    assert hair.diameter == pytest.approx(0.5, abs=1 / rings(m))


def test_post_diffeomorphism_keeps_fibers():
    m = build_disk_mesh(16, 3)
    plain = detect_hairs(collapse_map(m, CollapseSpec(1.0, np.pi, 0.5)))
    bent = detect_hairs(collapse_map(m, CollapseSpec(1.0, np.pi, 0.5), post=lambda z: z * np.abs(z)))
    np.testing.assert_array_equal(plain.hairs[0].fiber_vertices, bent.hairs[0].fiber_vertices)


def test_disjoint_hairs(three_hairs):
    m = three_hairs.mesh
    rep = detect_hairs(three_hairs)
    assert len(rep) == 3
    sets = [set(x.fiber_vertices) for x in rep.hairs]
    assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
    assert sorted(len(s) for s in sets) == sorted([expected_fiber(m, 0.4)] * 2 + [expected_fiber(m, 0.2)])
    assert sorted(round(x.tip.real) + 2 * round(x.tip.imag) for x in rep.hairs) == [-1, 1, 2]


@given(st.lists(st.sampled_from(range(4)), min_size=1, max_size=4, unique=True),
       st.sampled_from([0.2, 0.3, 0.4]), st.sampled_from([2, 3]))
def test_collapse_count_matches_construction(axes, length, refinement):
    m = build_disk_mesh(16, refinement)
    specs = [CollapseSpec(AXES[a][0], AXES[a][1], length, width=0.4, support=0.6) for a in axes]
    h = collapse_map(m, specs)
    rep = detect_hairs(h)
    assert len(rep) == len(axes)
    for hair in rep.hairs:
        assert hair.boundary_vertices == 1
        assert hair.image_diameter <= rep.collapse_tol
        assert connected(m, hair.fiber_vertices)
        assert len(hair.fiber_vertices) == expected_fiber(m, length)


def test_segment_longer_than_support_rejected():
    m = build_disk_mesh(16, 2)
    with pytest.raises(ValueError):
        collapse_map(m, CollapseSpec(1.0, np.pi, 0.5, support=0.4))


# --- diffeomorphisms -------------------------------------------------------


def test_no_hairs_for_diffeomorphisms(mesh3):
    assert len(detect_hairs(TriMeshMap(mesh3, mesh3.vertices * np.abs(mesh3.vertices)))) == 0
    assert len(detect_hairs(harmonic_extension("sin:a=0.3", mesh3))) == 0
    assert len(detect_hairs(TriMeshMap(mesh3, mesh3.vertices.copy()), collapse_tol=1.0)) == 0


def test_reversed_orientation_raises(mesh2):
    with pytest.raises(OrientationError):
        detect_hairs(TriMeshMap(mesh2, np.conj(mesh2.vertices)))


def test_default_tolerance_is_a_tenth_of_mean_edge(mesh2):
    h = TriMeshMap(mesh2, 2 * mesh2.vertices)
    e = mesh2.edges
    assert default_collapse_tol(h) == pytest.approx(0.2 * np.abs(mesh2.vertices[e[:, 1]] - mesh2.vertices[e[:, 0]]).mean())


# --- tip measure -----------------------------------------------------------


def test_tip_measure_without_hairs(mesh2):
    h = TriMeshMap(mesh2, mesh2.vertices.copy())
    rep = detect_hairs(h)
    assert tip_measure(rep, h) == 0.0 and rep.uncovered == []


def test_tip_measure_nondecreasing_in_tolerance(three_hairs):
    tols = [1e-9, 1e-3, 1e-2, 0.1, 0.3]
    z = []
    for tol in tols:
        rep = detect_hairs(three_hairs, tol)
        z.append(tip_measure(rep, three_hairs))
        # each hair's image spread is at most tol
        assert z[-1] <= len(rep) * tol + 1e-15
    assert np.all(np.diff(z) >= 0)
    assert z[0] == 0.0 and z[-1] > 0


def test_short_hair_missing_probes_is_flagged():
    m = build_disk_mesh(16, 4)
    h = collapse_map(m, CollapseSpec(1.0, np.pi, 0.05))
    rep = detect_hairs(h)
    assert len(rep) == 1
    assert tip_measure(rep, h, [0.2, 0.4, 0.6]) == 0.0
    assert rep.uncovered == [0]
    tip_measure(rep, h)  # default probes reach 1 - 2^-8
    assert rep.uncovered == []


def test_hairs_longer_than_probe_gap_are_hit(three_hairs):
    rep = detect_hairs(three_hairs)
    probes = default_probes(8)
    tip_measure(rep, three_hairs, probes)
    gap = np.max(np.diff(probes))
    assert all(j not in rep.uncovered for j, x in enumerate(rep.hairs) if x.diameter > gap)


@pytest.mark.parametrize("radii", [[0.5, 0.4], [0.0, 0.5], [0.5, 1.0]])
def test_bad_probe_radii(three_hairs, radii):
    with pytest.raises(ValueError):
        tip_measure(detect_hairs(three_hairs), three_hairs, radii)


def test_default_probes():
    np.testing.assert_array_equal(default_probes(3), [0.5, 0.75, 0.875])


def test_hyperbolic_diameter():
    assert hyperbolic_diameter([0, 0.5]) == pytest.approx(2 * np.arctanh(0.5))
    assert hyperbolic_diameter([0.2]) == 0.0
    assert hyperbolic_diameter([0, 1.0]) == np.inf
