"""Triangulated disks, piecewise-affine complex maps and Wirtinger derivatives.

Points of the plane are stored as complex numbers throughout. A map is
piecewise affine: on every triangle it is ``w = c + f_z z + f_zbar conj(z)``
and the two Wirtinger derivatives are constant there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    """Raised for invalid or degenerate meshes."""


class OrientationError(ValueError):
    """Raised when a quantity needs a positive Jacobian and does not get one."""

    def __init__(self, message, triangles=()):
        super().__init__(message)
        self.triangles = list(triangles)


class PointLocationError(ValueError):
    def __init__(self, point):
        super().__init__(f"point {point!r} lies outside the mesh hull")
        self.point = point


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray  # complex (nv,)
    triangles: np.ndarray  # int (nt, 3), counterclockwise
    boundary_loop: np.ndarray  # int, counterclockwise
    refinement_level: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=complex)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_loop = np.asarray(self.boundary_loop, dtype=np.int64)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self):
        t = self.triangles
        v = self.vertices
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    @property
    def areas(self) -> np.ndarray:
        """Signed triangle areas."""
        if "areas" not in self._cache:
            self._cache["areas"] = signed_areas(self.vertices, self.triangles)
        return self._cache["areas"]

    @property
    def centroids(self) -> np.ndarray:
        if "centroids" not in self._cache:
            z0, z1, z2 = self.corners()
            self._cache["centroids"] = (z0 + z1 + z2) / 3.0
        return self._cache["centroids"]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        if "edges" not in self._cache:
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            e.sort(axis=1)
            self._cache["edges"] = np.unique(e, axis=0)
        return self._cache["edges"]

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of vertices not on the boundary loop."""
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_loop] = False
        return mask

    def diameters(self) -> np.ndarray:
        z0, z1, z2 = self.corners()
        return np.max(np.abs([z1 - z0, z2 - z1, z0 - z2]), axis=0)

    def wirtinger_operators(self):
        """Per-triangle coefficients ``(Gz, Gzbar)`` of shape (nt, 3).

        For vertex values ``w`` the derivatives on triangle ``t`` are
        ``sum_k Gz[t, k] * w[tri[t, k]]`` and likewise for ``Gzbar``.
        """
        if "wirt" not in self._cache:
            z0, z1, z2 = self.corners()
            e1 = z1 - z0
            e2 = z2 - z0
            d = e1 * np.conj(e2) - np.conj(e1) * e2  # = -4i * signed area
            if np.any(np.abs(d) == 0):
                raise MeshError("degenerate domain triangle")
            gz = np.stack([np.conj(e1) - np.conj(e2), np.conj(e2), -np.conj(e1)], axis=1) / d[:, None]
            gzb = np.stack([e2 - e1, -e2, e1], axis=1) / d[:, None]
            self._cache["wirt"] = (gz, gzb)
        return self._cache["wirt"]

    def check(self, disk: bool = True, tol: float = BOUNDARY_TOL):
        """Validate the mesh invariants; raises :class:`MeshError`."""
        if np.any(self.areas <= 0):
            bad = np.flatnonzero(self.areas <= 0)
            raise MeshError(f"{len(bad)} triangles with nonpositive area, first {bad[0]}")
        # conforming: every interior edge is shared by exactly two triangles
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        directed = {tuple(x) for x in e.tolist()}
        if len(directed) != len(e):
            raise MeshError("repeated directed edge: triangulation not conforming")
        bnd_edges = [x for x in directed if (x[1], x[0]) not in directed]
        if len(bnd_edges) != len(self.boundary_loop):
            raise MeshError("boundary edge count does not match boundary loop")
        if disk:
            zb = self.vertices[self.boundary_loop]
            if np.max(np.abs(np.abs(zb) - 1.0)) > tol:
                raise MeshError("boundary vertex off the unit circle")
            steps = np.mod(np.diff(np.angle(np.r_[zb, zb[:1]])), 2 * np.pi)
            if np.any(steps <= 0) or abs(steps.sum() - 2 * np.pi) > 1e-9:
                raise MeshError("boundary loop is not counterclockwise")
        return self


def apply_operator(op, w) -> np.ndarray:
    """Per-triangle ``sum_k op[:, k] w[:, k]`` written on edge differences.

    The three weights sum to zero, so constants give exactly 0.
    """
    return op[:, 1] * (w[:, 1] - w[:, 0]) + op[:, 2] * (w[:, 2] - w[:, 0])


def signed_areas(vertices, triangles) -> np.ndarray:
    v = np.asarray(vertices)
    t = np.asarray(triangles)
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    return 0.5 * (e1.real * e2.imag - e1.imag * e2.real)


def _stitch(inner, outer, pts):
    """Triangulate the annular strip between two closed rings of indices.

    Both rings are ordered by increasing angle. The shorter of the two
    candidate diagonals is taken at each step, as long as it yields a
    positively oriented triangle.
    """
    m, n = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < m or j < n:
        a, a1 = inner[i % m], inner[(i + 1) % m]
        b, b1 = outer[j % n], outer[(j + 1) % n]
        cand_outer = (a, b, b1)
        cand_inner = (a, b, a1)
        if i == m:
            choice = "outer"
        elif j == n:
            choice = "inner"
        else:
            choice = "outer" if abs(pts[a] - pts[b1]) <= abs(pts[a1] - pts[b]) else "inner"
            trial = cand_outer if choice == "outer" else cand_inner
            if signed_areas(pts, np.array([trial]))[0] <= 0:
                choice = "inner" if choice == "outer" else "outer"
        if choice == "outer":
            tris.append(cand_outer)
            j += 1
        else:
            tris.append(cand_inner)
            i += 1
    return tris


def build_disk_mesh(n_boundary: int = 16, refinement: int = 0) -> TriMesh:
    """Concentric-ring triangulation of the closed unit disk.

    The boundary carries ``n_boundary * 2**refinement`` vertices. The ring
    gap is the height of an equilateral triangle on the arc spacing, which
    keeps triangles close to equilateral. Ring sizes are multiples of four
    and every ring starts at angle zero, so both axes are unions of edges.
    """
    if int(n_boundary) != n_boundary or n_boundary < 8:
        raise ValueError("n_boundary must be an integer >= 8")
    if int(refinement) != refinement or refinement < 0:
        raise ValueError("refinement must be a nonnegative integer")
    n = int(n_boundary) * 2 ** int(refinement)
    # ring gap = sqrt(3)/2 x arc spacing: near-equilateral triangles
    rings = max(1, int(round(n / (np.sqrt(3) * np.pi))))
    pts = [0j]
    ring_idx = []
    for k in range(1, rings + 1):
        count = n if k == rings else 4 * max(1, int(round(n * k / (4 * rings))))
        ang = 2 * np.pi * np.arange(count) / count
        r = k / rings
        start = len(pts)
        if k == rings:
            ring = np.cos(ang) + 1j * np.sin(ang)
        else:
            ring = r * np.exp(1j * ang)
        pts.extend(ring.tolist())
        ring_idx.append(list(range(start, start + count)))
    pts = np.array(pts)
    tris = []
    first = ring_idx[0]
    for a in range(len(first)):
        tris.append((0, first[a], first[(a + 1) % len(first)]))
    for inner, outer in zip(ring_idx[:-1], ring_idx[1:]):
        tris.extend(_stitch(inner, outer, pts))
    mesh = TriMesh(pts, np.array(tris), np.array(ring_idx[-1]), int(refinement))
    return mesh.check()


@dataclass(eq=False)
class TriMeshMap:
    """Piecewise-affine map given by the image of every mesh vertex."""

    mesh: TriMesh
    image: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=complex)
        if self.image.shape != (self.mesh.n_vertices,):
            raise ValueError("image must hold one complex value per vertex")

    @classmethod
    def from_function(cls, mesh, func):
        return cls(mesh, func(mesh.vertices))

    @property
    def image_areas(self) -> np.ndarray:
        if "image_areas" not in self._cache:
            self._cache["image_areas"] = signed_areas(self.image, self.mesh.triangles)
        return self._cache["image_areas"]

    @property
    def orientation_flag(self) -> np.ndarray:
        return np.sign(self.image_areas).astype(int)

    @property
    def orientation_preserving(self) -> bool:
        return bool(np.all(self.image_areas > 0))

    def derivatives(self):
        """Arrays ``(f_z, f_zbar)`` with one entry per triangle."""
        if "deriv" not in self._cache:
            gz, gzb = self.mesh.wirtinger_operators()
            w = self.image[self.mesh.triangles]
            self._cache["deriv"] = (apply_operator(gz, w), apply_operator(gzb, w))
        return self._cache["deriv"]

    def jacobians(self) -> np.ndarray:
        fz, fzb = self.derivatives()
        return np.abs(fz) ** 2 - np.abs(fzb) ** 2

    def boundary_on_circle(self, tol=1e-9) -> bool:
        zb = self.image[self.mesh.boundary_loop]
        return bool(np.max(np.abs(np.abs(zb) - 1.0)) <= tol)

    def __call__(self, points, hull_tol=1e-9):
        """Evaluate the map at arbitrary points of the domain mesh."""
        tri, bary = locate(self.mesh, points, hull_tol=hull_tol)
        w = self.image[self.mesh.triangles[tri]]
        return np.sum(w * bary, axis=-1)


@dataclass(frozen=True)
class DerivativeSample:
    f_z: complex
    f_zbar: complex
    jacobian: float
    triangle_id: int | None = None

    @classmethod
    def from_derivatives(cls, f_z, f_zbar, triangle_id=None):
        f_z, f_zbar = complex(f_z), complex(f_zbar)
        return cls(f_z, f_zbar, abs(f_z) ** 2 - abs(f_zbar) ** 2, triangle_id)


def wirtinger(fmap: TriMeshMap, triangle_id: int) -> DerivativeSample:
    """Exact Wirtinger derivatives of ``fmap`` on one triangle."""
    mesh = fmap.mesh
    if not 0 <= triangle_id < mesh.n_triangles:
        raise IndexError(f"no triangle {triangle_id}")
    if mesh.areas[triangle_id] <= 0:
        raise MeshError(f"degenerate domain triangle {triangle_id}")
    fz, fzb = fmap.derivatives()
    return DerivativeSample.from_derivatives(fz[triangle_id], fzb[triangle_id], triangle_id)


def dbar_residual(values, mesh: TriMesh):
    """d/dzbar of the piecewise-affine interpolant of vertex values.

    Returns the per-triangle residual and its L1 norm
    ``sum |residual| * area`` (summed in triangle order).
    """
    values = np.asarray(values, dtype=complex)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("need one value per vertex")
    _, gzb = mesh.wirtinger_operators()
    res = apply_operator(gzb, values[mesh.triangles])
    l1 = float(np.sum(np.abs(res) * mesh.areas))
    return res, l1


# --- point location -------------------------------------------------------


class _Locator:
    def __init__(self, vertices, triangles, cells=None):
        self.v = vertices
        self.t = triangles
        z = vertices[triangles]
        lo = np.min(z.real, axis=1), np.min(z.imag, axis=1)
        hi = np.max(z.real, axis=1), np.max(z.imag, axis=1)
        self.x0, self.y0 = lo[0].min(), lo[1].min()
        span = max(hi[0].max() - self.x0, hi[1].max() - self.y0, 1e-300)
        nc = cells or max(1, int(np.sqrt(len(triangles) / 2)))
        self.nc = nc
        self.h = span / nc * (1 + 1e-12)
        ix0 = self._cell(lo[0], self.x0)
        ix1 = self._cell(hi[0], self.x0)
        iy0 = self._cell(lo[1], self.y0)
        iy1 = self._cell(hi[1], self.y0)
        cell_ids, tri_ids = [], []
        for t in range(len(triangles)):
            xs = np.arange(ix0[t], ix1[t] + 1)
            ys = np.arange(iy0[t], iy1[t] + 1)
            c = (xs[:, None] * nc + ys[None, :]).ravel()
            cell_ids.append(c)
            tri_ids.append(np.full(len(c), t))
        cell_ids = np.concatenate(cell_ids)
        tri_ids = np.concatenate(tri_ids)
        order = np.argsort(cell_ids, kind="stable")
        self.cell_tris = tri_ids[order]
        self.ptr = np.searchsorted(cell_ids[order], np.arange(nc * nc + 1))

    def _cell(self, x, x0):
        return np.clip(((x - x0) / self.h).astype(int), 0, self.nc - 1)

    def bary(self, tri, p):
        z = self.v[self.t[tri]]
        z0, z1, z2 = z[..., 0], z[..., 1], z[..., 2]
        e1, e2, d = z1 - z0, z2 - z0, p - z0
        den = e1.real * e2.imag - e1.imag * e2.real
        l1 = (d.real * e2.imag - d.imag * e2.real) / den
        l2 = (e1.real * d.imag - e1.imag * d.real) / den
        return np.stack([1 - l1 - l2, l1, l2], axis=-1)

    def __call__(self, points, hull_tol):
        p = np.atleast_1d(np.asarray(points, dtype=complex))
        flat = p.ravel()
        ix = self._cell(flat.real, self.x0)
        iy = self._cell(flat.imag, self.y0)
        c = ix * self.nc + iy
        start, stop = self.ptr[c], self.ptr[c + 1]
        counts = stop - start
        q = np.repeat(np.arange(len(flat)), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        cand = self.cell_tris[np.repeat(start, counts) + offs]
        lam = self.bary(cand, flat[q])
        score = lam.min(axis=1)
        best_tri = np.full(len(flat), -1)
        best_score = np.full(len(flat), -np.inf)
        # largest minimal barycentric coordinate wins; deterministic
        order = np.lexsort((cand, score))
        best_tri[q[order]] = cand[order]
        best_score[q[order]] = score[order]
        missing = best_score < -1e-12
        if np.any(missing):
            best_tri, best_score = self._fallback(flat, best_tri, best_score, missing)
        lam = self.bary(best_tri, flat)
        outside = best_score < -1e-12
        if np.any(outside):
            # distance from the point to the chosen triangle
            dist = _dist_to_triangles(flat[outside], self.v[self.t[best_tri[outside]]])
            bad = np.flatnonzero(outside)[dist > hull_tol]
            if len(bad):
                raise PointLocationError(complex(flat[bad[0]]))
            lam[outside] = np.clip(lam[outside], 0, None)
            lam[outside] /= lam[outside].sum(axis=1, keepdims=True)
        return best_tri.reshape(p.shape), lam.reshape(p.shape + (3,))

    def _fallback(self, flat, best_tri, best_score, missing):
        # brute force over triangles for points not inside their cell's candidates
        for k in np.flatnonzero(missing):
            lam = self.bary(np.arange(len(self.t)), np.full(len(self.t), flat[k]))
            s = lam.min(axis=1)
            z = self.v[self.t]
            d = _dist_to_triangles(np.full(len(self.t), flat[k]), z)
            t = int(np.argmax(s)) if s.max() >= -1e-12 else int(np.argmin(d))
            best_tri[k] = t
            best_score[k] = s[t]
        return best_tri, best_score


def _dist_to_segment(p, a, b):
    ab = b - a
    t = np.clip(((p - a) * np.conj(ab)).real / np.maximum(np.abs(ab) ** 2, 1e-300), 0, 1)
    return np.abs(p - (a + t * ab))


def _dist_to_triangles(p, z):
    return np.min(
        [_dist_to_segment(p, z[:, 0], z[:, 1]), _dist_to_segment(p, z[:, 1], z[:, 2]),
         _dist_to_segment(p, z[:, 2], z[:, 0])],
        axis=0,
    )


def locate(mesh: TriMesh, points, hull_tol: float = 1e-9):
    """Triangle index and barycentric coordinates for each point.

    Points outside the mesh by more than ``hull_tol`` raise
    :class:`PointLocationError`; points within the tolerance are clamped to
    the nearest triangle.
    """
    if "locator" not in mesh._cache:
        mesh._cache["locator"] = _Locator(mesh.vertices, mesh.triangles)
    return mesh._cache["locator"](points, hull_tol)


# --- serialization --------------------------------------------------------


def map_to_dict(fmap: TriMeshMap) -> dict:
    m = fmap.mesh
    return {
        "vertices": [[z.real, z.imag] for z in m.vertices],
        "triangles": m.triangles.tolist(),
        "image": [[w.real, w.imag] for w in fmap.image],
        "boundary_loop": m.boundary_loop.tolist(),
        "refinement_level": m.refinement_level,
    }


def map_from_dict(doc: dict) -> TriMeshMap:
    v = np.array(doc["vertices"], dtype=float)
    w = np.array(doc["image"], dtype=float)
    mesh = TriMesh(v[:, 0] + 1j * v[:, 1], doc["triangles"], doc["boundary_loop"],
                   doc.get("refinement_level", 0))
    return TriMeshMap(mesh, w[:, 0] + 1j * w[:, 1])
