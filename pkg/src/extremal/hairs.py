"""Non-singleton fibers (hairs) of monotone mesh maps and their tip measure."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .mesh import OrientationError, TriMesh, TriMeshMap


@dataclass
class Hair:
    fiber_vertices: np.ndarray
    image_point: complex
    tip: complex | None  # boundary vertex in the fiber, if any
    diameter: float  # Euclidean, in the domain
    image_diameter: float
    boundary_vertices: int

    def as_dict(self):
        return {"fiber_vertices": self.fiber_vertices.tolist(), "image_point": [self.image_point.real, self.image_point.imag],
                "tip": None if self.tip is None else [self.tip.real, self.tip.imag], "diameter": self.diameter,
                "image_diameter": self.image_diameter, "boundary_vertices": self.boundary_vertices}


@dataclass
class HairReport:
    hairs: list
    collapse_tol: float
    Z_estimate: float | None = None
    probe_radii: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)

    def __len__(self):
        return len(self.hairs)

    def as_dict(self):
        return {"collapse_tol": self.collapse_tol, "Z_estimate": self.Z_estimate, "probe_radii": list(self.probe_radii),
                "uncovered": list(self.uncovered), "hairs": [h.as_dict() for h in self.hairs]}


def default_collapse_tol(h: TriMeshMap) -> float:
    e = h.mesh.edges
    return 0.1 * float(np.mean(np.abs(h.image[e[:, 1]] - h.image[e[:, 0]])))


def _diameter(z) -> float:
    z = np.asarray(z)
    if len(z) < 2:
        return 0.0
    if len(z) > 3000:  # hull-free bound is enough for huge clusters
        return float(2 * np.max(np.abs(z - z.mean())))
    return float(np.max(pdist(np.column_stack([z.real, z.imag]))))


def detect_hairs(h: TriMeshMap, collapse_tol: float | None = None) -> HairReport:
    """Vertex clusters on which ``h`` collapses to (nearly) a point.

    Only edges of image-degenerate triangles are candidates, so maps with
    positive Jacobian everywhere have no hairs. Candidate edges with image
    length ``<= collapse_tol`` are joined into connected components. A
    component whose image spreads wider than ``collapse_tol`` is cut down to
    its largest connected part within ``collapse_tol / 2`` of the image
    point most of its vertices share.
    """
    tol = default_collapse_tol(h) if collapse_tol is None else float(collapse_tol)
    mesh = h.mesh
    ia = h.image_areas
    scale = float(np.mean(np.abs(ia))) or 1.0
    eps = 1e-12 * scale
    if np.any(ia < -eps):
        raise OrientationError("map reverses orientation", np.flatnonzero(ia < -eps))
    degenerate = np.flatnonzero(ia <= eps)
    if len(degenerate) == 0:
        return HairReport([], tol)
    t = mesh.triangles[degenerate]
    cand = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    cand = np.unique(np.sort(cand, axis=1), axis=0)
    short = np.abs(h.image[cand[:, 1]] - h.image[cand[:, 0]]) <= tol
    cand = cand[short]
    if len(cand) == 0:
        return HairReport([], tol)
    nv = mesh.n_vertices
    g = sp.coo_matrix((np.ones(len(cand)), (cand[:, 0], cand[:, 1])), shape=(nv, nv))
    _, labels = connected_components(g, directed=False)
    used = np.unique(cand)
    on_boundary = np.zeros(nv, dtype=bool)
    on_boundary[mesh.boundary_loop] = True
    hairs = []
    for lab in np.unique(labels[used]):
        verts = _core(used[labels[used] == lab], h.image, cand, tol)
        if len(verts) < 2:
            continue
        img = h.image[verts]
        idiam = _diameter(img)
        bverts = verts[on_boundary[verts]]
        tip = complex(mesh.vertices[bverts[0]]) if len(bverts) else None
        hairs.append(Hair(verts, complex(img.mean()), tip, _diameter(mesh.vertices[verts]), idiam, len(bverts)))
    hairs.sort(key=lambda x: int(x.fiber_vertices[0]))
    return HairReport(hairs, tol)


def _core(verts, image, edges, tol):
    """Largest connected part of a cluster within tol/2 of its collapse point."""
    img = image[verts]
    if _diameter(img) <= tol:
        return verts
    pts = np.column_stack([img.real, img.imag])
    tree = cKDTree(pts)
    # prefer the point most vertices collapse onto exactly, then density
    exact = tree.query_ball_point(pts, r=1e-12 * (1 + np.abs(img).max()), return_length=True)
    near = tree.query_ball_point(pts, r=tol / 2, return_length=True)
    center = img[np.lexsort((near, exact))[-1]]
    keep = verts[np.abs(img - center) <= tol / 2]
    if len(keep) < 2:
        return keep
    mask = np.zeros(len(image), dtype=bool)
    mask[keep] = True
    sub = edges[mask[edges[:, 0]] & mask[edges[:, 1]]]
    if len(sub) == 0:
        return keep[:0]
    n = len(image)
    g = sp.coo_matrix((np.ones(len(sub)), (sub[:, 0], sub[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    used = np.unique(sub)
    best = np.bincount(labels[used]).argmax()
    return used[labels[used] == best]


def default_probes(n: int = 8) -> np.ndarray:
    """Radii ``1 - 2^-k``, k = 1..n, accumulating at the circle."""
    return 1 - 0.5 ** np.arange(1, n + 1)


def _fiber_edges(mesh: TriMesh, verts) -> np.ndarray:
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[verts] = True
    e = mesh.edges
    return e[inside[e[:, 0]] & inside[e[:, 1]]]


def _circle_crossings(mesh, h, edges, r):
    """Domain points of edges meeting ``|z| = r`` and their images under h."""
    z0, z1 = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    d = z1 - z0
    # |z0 + t d|^2 = r^2
    a = np.abs(d) ** 2
    b = 2 * (np.conj(z0) * d).real
    c = np.abs(z0) ** 2 - r * r
    disc = b * b - 4 * a * c
    ts, idx = [], []
    ok = (a > 0) & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0))
    for sgn in (-1, 1):
        t = np.where(ok, (-b + sgn * sq) / np.where(a > 0, 2 * a, 1), -1)
        hit = (t >= 0) & (t <= 1)
        ts.append(t[hit])
        idx.append(np.flatnonzero(hit))
    t = np.concatenate(ts)
    k = np.concatenate(idx)
    w0, w1 = h.image[edges[k, 0]], h.image[edges[k, 1]]
    return z0[k] + t * d[k], w0 + t * (w1 - w0)


def tip_measure(report: HairReport, h: TriMeshMap, probe_radii=None) -> float:
    """Largest, over probe circles, of the summed image spread of hair crossings.

    For each circle ``|z| = r_n`` and each hair, the fiber edges crossing the
    circle are intersected with it and the diameter of their images is
    taken. Hairs touching no probe are listed in ``report.uncovered``.
    """
    radii = default_probes() if probe_radii is None else np.asarray(probe_radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii >= 1) or np.any(np.diff(radii) <= 0):
        raise ValueError("probe radii must be strictly increasing in (0, 1)")
    mesh = h.mesh
    per_probe = np.zeros(len(radii))
    hit = np.zeros(len(report.hairs), dtype=bool)
    for j, hair in enumerate(report.hairs):
        edges = _fiber_edges(mesh, hair.fiber_vertices)
        if len(edges) == 0:
            continue
        for i, r in enumerate(radii):
            pts, imgs = _circle_crossings(mesh, h, edges, r)
            if len(pts):
                hit[j] = True
                per_probe[i] += _diameter(imgs)
    report.probe_radii = radii.tolist()
    report.uncovered = [j for j in range(len(report.hairs)) if not hit[j]]
    report.Z_estimate = float(per_probe.max()) if len(per_probe) else 0.0
    return report.Z_estimate


def hyperbolic_diameter(points) -> float:
    """Largest pairwise distance in the curvature -1 disk metric."""
    z = np.asarray(points, dtype=complex)
    if np.any(np.abs(z) >= 1):
        return np.inf
    if len(z) < 2:
        return 0.0
    i, j = np.triu_indices(len(z), 1)
    q = np.abs(z[i] - z[j]) ** 2 / ((1 - np.abs(z[i]) ** 2) * (1 - np.abs(z[j]) ** 2))
    return float(np.max(np.arccosh(1 + 2 * q)))


# --- synthetic collapse maps ----------------------------------------------


@dataclass(frozen=True)
class CollapseSpec:
    """Collapse the segment ``tip + s e^{i direction}``, ``0 <= s <= length``, onto ``tip``.

    In polar coordinates about the tip, radii shrink by ``b(phi) m(rho)``
    with ``b`` a tent of half-width ``width`` around ``direction``; ``m``
    equals ``rho`` up to ``length`` and tapers to zero at ``min(support,
    distance to the unit circle)``. The circle and everything outside the
    support are fixed.
    """

    tip: complex
    direction: float
    length: float
    width: float = 0.5
    support: float = np.inf


def _ray_to_circle(tip, phi):
    u = np.exp(1j * phi)
    p = (np.conj(tip) * u).real
    return -p + np.sqrt(np.maximum(p * p + 1 - abs(tip) ** 2, 0))


def collapse_points(z, spec: CollapseSpec):
    z = np.asarray(z, dtype=complex)
    w = z - spec.tip
    rho = np.abs(w)
    phi = np.angle(w)
    off = np.angle(np.exp(1j * (phi - spec.direction)))
    b = np.clip(1 - np.abs(off) / spec.width, 0, 1)
    R = np.minimum(spec.support, _ray_to_circle(spec.tip, phi))
    ell = spec.length
    m = np.where(rho <= ell, rho, ell * np.clip(R - rho, 0, None) / np.where(R > ell, R - ell, 1))
    m = np.where(b > 0, m, 0)
    return spec.tip + (rho - b * m) * np.exp(1j * phi)


def collapse_map(mesh: TriMesh, specs, post=None) -> TriMeshMap:
    """Mesh map collapsing each spec's segment; supports must be disjoint.

    ``post`` (a callable disk diffeomorphism) is applied afterwards and does
    not change the fibers.
    """
    if isinstance(specs, CollapseSpec):
        specs = [specs]
    z = mesh.vertices.copy()
    for s in specs:
        phis = s.direction + np.linspace(-s.width, s.width, 201)
        reach = np.minimum(s.support, _ray_to_circle(s.tip, phis))
        if not np.all(reach > 1.05 * s.length):
            raise ValueError("collapse segment does not fit inside its support")
        z = collapse_points(z, s)
    if post is not None:
        z = np.asarray(post(z), dtype=complex)
    return TriMeshMap(mesh, z)


def ray_vertices(mesh: TriMesh, angle: float = 0.0, tol: float = 1e-12) -> np.ndarray:
    """Vertices on the ray at ``angle`` from the origin, sorted by radius."""
    v = mesh.vertices
    on = (np.abs((v * np.exp(-1j * angle)).imag) <= tol) & ((v * np.exp(-1j * angle)).real >= -tol)
    idx = np.flatnonzero(on)
    return idx[np.argsort(np.abs(v[idx]))]
