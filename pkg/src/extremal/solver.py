"""Energy minimization over interior vertex images with fixed boundary values."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .boundary import BoundaryData, InfeasibleInputError, boundary_from_spec
from .energy import CONST, DistortionGauge, WeightField, energy_and_gradient
from .mesh import OrientationError, PointLocationError, TriMesh, TriMeshMap, locate

log = logging.getLogger(__name__)


def cotan_laplacian(mesh: TriMesh) -> sp.csr_matrix:
    """P1 stiffness matrix (positive semidefinite)."""
    if "laplacian" in mesh._cache:
        return mesh._cache["laplacian"]
    tri = mesh.triangles
    z = mesh.vertices[tri]
    area = mesh.areas
    rows, cols, vals = [], [], []
    for k in range(3):
        # edge (i, j) opposite corner k
        i, j = tri[:, (k + 1) % 3], tri[:, (k + 2) % 3]
        u = z[:, (k + 1) % 3] - z[:, k]
        v = z[:, (k + 2) % 3] - z[:, k]
        w = 0.5 * (u * np.conj(v)).real / (2 * area)
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_vertices,) * 2)
    mesh._cache["laplacian"] = L
    return L


def _interior_factor(mesh: TriMesh):
    if "interior_lu" not in mesh._cache:
        L = cotan_laplacian(mesh)
        free = np.flatnonzero(mesh.interior)
        mesh._cache["interior_lu"] = (splu(L[free][:, free].tocsc()), free)
    return mesh._cache["interior_lu"]


def _solve_real(lu, rhs):
    rhs = np.asarray(rhs)
    if np.iscomplexobj(rhs):
        out = lu.solve(np.column_stack([rhs.real, rhs.imag]))
        return out[:, 0] + 1j * out[:, 1]
    return lu.solve(rhs)


def harmonic_extension(boundary, mesh: TriMesh) -> TriMeshMap:
    """Discrete harmonic (cotangent Laplacian) extension of boundary data."""
    boundary = boundary_from_spec(boundary)
    values = boundary.samples(mesh)
    return harmonic_extension_values(values, mesh)


def harmonic_extension_values(values, mesh: TriMesh) -> TriMeshMap:
    values = np.asarray(values, dtype=complex)
    L = cotan_laplacian(mesh)
    lu, free = _interior_factor(mesh)
    img = np.zeros(mesh.n_vertices, dtype=complex)
    img[mesh.boundary_loop] = values
    rhs = -(L[free][:, mesh.boundary_loop] @ values)
    img[free] = _solve_real(lu, rhs)
    return TriMeshMap(mesh, img)


@dataclass
class SolveOptions:
    gtol: float = 1e-7
    max_iter: int = 5000
    memory: int = 10
    armijo: float = 1e-4
    min_step: float = 1e-16
    max_rejections: int = 60
    fixed_vertices: tuple = ()
    ftol: float = 0.0


@dataclass
class SolveReport:
    final_energy: float
    gradient_norm: float
    iterations: int
    min_jacobian: float
    w1q_norm_ratio: float
    roundtrip_error: float
    status: str = "converged"
    initial_energy: float = float("nan")
    rejected_steps: int = 0
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def converged(self):
        return self.status == "converged"

    def as_dict(self, history=False):
        d = {k: v for k, v in vars(self).items() if k != "energy_history"}
        if history:
            d["energy_history"] = list(self.energy_history)
        return d


def lumped_areas(mesh: TriMesh) -> np.ndarray:
    return np.bincount(mesh.triangles.ravel(), np.repeat(mesh.areas / 3, 3), minlength=mesh.n_vertices)


def scaled_gradient_norm(grad, mesh, free) -> float:
    """RMS over free vertices of |dE/dw_i| divided by the lumped vertex area.

    This is a mesh-independent measure of the pointwise Euler-Lagrange
    residual.
    """
    if len(free) == 0:
        return 0.0
    g = grad[free] / lumped_areas(mesh)[free]
    return float(np.sqrt(np.mean(np.abs(g) ** 2)))


def lq_norm_derivative(fmap: TriMeshMap, q: float) -> float:
    fz, fzb = fmap.derivatives()
    dnorm = np.abs(fz) + np.abs(fzb)
    return float(np.sum(dnorm**q * fmap.mesh.areas) ** (1 / q))


def minimize_energy(mesh: TriMesh, boundary, gauge: DistortionGauge, weight: WeightField = CONST,
                    side: str = "f_side", opts: SolveOptions | None = None, initial=None):
    """Minimize the discrete energy with the boundary values held fixed.

    ``side="f_side"`` minimizes sum A(K) eta over maps with boundary data
    ``boundary``; ``side="h_side"`` minimizes the inverse functional
    sum A(K) J eta(h) for boundary data ``boundary`` (pass the inverse
    circle map yourself). The start is the harmonic extension unless
    ``initial`` is given.

    Preconditioned L-BFGS with Armijo backtracking. Trial steps that invert
    a triangle are rejected and halved, so every accepted iterate has
    positive Jacobian on all triangles. Returns ``(map, SolveReport)``;
    nonconvergence is reported in ``report.status``.
    """
    opts = opts or SolveOptions()
    boundary = boundary_from_spec(boundary)
    if initial is None:
        start = harmonic_extension(boundary, mesh)
    else:
        start = initial
    image = start.image.copy()
    lu, free = _interior_factor(mesh)
    if opts.fixed_vertices:
        pinned = np.zeros(mesh.n_vertices, dtype=bool)
        pinned[list(opts.fixed_vertices)] = True
        keep = ~pinned[free]
        free = free[keep]
        L = cotan_laplacian(mesh)
        lu = splu(L[free][:, free].tocsc())

    def fg(x):
        img = image.copy()
        img[free] = x
        e, g = energy_and_gradient(mesh, img, gauge, weight, side)
        return e, (None if g is None else g[free])

    x = image[free].copy()
    e, g = fg(x)
    if not np.isfinite(e):
        raise InfeasibleInputError("initial map is not orientation preserving")
    e0 = e
    history = [e]
    inner = lambda a, b: float(np.sum((np.conj(a) * b).real))
    s_list, y_list = deque(maxlen=opts.memory), deque(maxlen=opts.memory)
    gamma = 1.0
    status = "max_iterations"
    rejected = 0
    it = 0
    full_grad = np.zeros(mesh.n_vertices, dtype=complex)

    def gnorm(gr):
        full_grad[:] = 0
        full_grad[free] = gr
        return scaled_gradient_norm(full_grad, mesh, free)

    gn = gnorm(g) if len(free) else 0.0
    if gn <= opts.gtol:
        status = "converged"
    else:
        for it in range(1, opts.max_iter + 1):
            # two-loop recursion, initial Hessian gamma * Laplacian^-1
            q = g.copy()
            alphas = []
            for s, y in reversed(list(zip(s_list, y_list))):
                rho = 1.0 / inner(y, s)
                a = rho * inner(s, q)
                alphas.append((a, rho, s, y))
                q = q - a * y
            r = gamma * _solve_real(lu, q)
            for a, rho, s, y in reversed(alphas):
                b = rho * inner(y, r)
                r = r + (a - b) * s
            d = -r
            slope = inner(g, d)
            if slope >= 0:
                s_list.clear()
                y_list.clear()
                d = -_solve_real(lu, g)
                slope = inner(g, d)
            t = 1.0
            if not s_list:
                # first step: keep the displacement below the local mesh size
                hmin = np.sqrt(np.min(mesh.areas))
                t = min(1.0, 0.25 * hmin / max(np.max(np.abs(d)), 1e-300))
            accepted = False
            for _ in range(opts.max_rejections):
                xn = x + t * d
                en, gnew = fg(xn)
                if np.isfinite(en) and en <= e + opts.armijo * t * slope:
                    accepted = True
                    break
                rejected += 1
                t *= 0.5
                if t < opts.min_step:
                    break
            if not accepted:
                status = "line_search_failed"
                break
            s_vec, y_vec = xn - x, gnew - g
            sy = inner(s_vec, y_vec)
            if sy > 1e-300:
                s_list.append(s_vec)
                y_list.append(y_vec)
                gamma = sy / inner(y_vec, _solve_real(lu, y_vec))
            de = e - en
            x, e, g = xn, en, gnew
            history.append(e)
            gn = gnorm(g)
            if gn <= opts.gtol:
                status = "converged"
                break
            if opts.ftol and de <= opts.ftol * max(abs(e), 1.0):
                status = "converged"
                break
    image[free] = x
    fmap = TriMeshMap(mesh, image)
    jac = fmap.jacobians()
    q = gauge.sobolev_exponent or 2 * gauge.p / (gauge.p + 1)
    ratio = lq_norm_derivative(fmap, q) / (lq_norm_derivative(start, q) + 1.0)
    try:
        rt = pseudo_inverse(fmap).roundtrip_error
    except (OrientationError, PointLocationError):
        rt = float("inf")
    report = SolveReport(
        final_energy=float(e), gradient_norm=float(gn), iterations=it, min_jacobian=float(jac.min()),
        w1q_norm_ratio=float(ratio), roundtrip_error=float(rt), status=status, initial_energy=float(e0),
        rejected_steps=rejected, energy_history=history,
    )
    log.info("minimize_energy %s: %s after %d iterations, E=%.12g, |g|=%.3g", side, status, it, e, gn)
    return fmap, report


@dataclass(eq=False)
class PseudoInverse:
    map: TriMeshMap
    roundtrip_error: float


def pseudo_inverse(fmap: TriMeshMap, hull_tol: float = 1e-9) -> PseudoInverse:
    """Inverse of an orientation-preserving mesh map on the image triangulation.

    The round trip ``|h(f(z)) - z|`` is measured at all vertices and
    centroids, locating ``f(z)`` in the image mesh independently.
    """
    if not fmap.orientation_preserving:
        bad = np.flatnonzero(fmap.image_areas <= 0)
        raise OrientationError("pseudo-inverse needs a positive Jacobian on every triangle", bad)
    mesh = fmap.mesh
    img_mesh = TriMesh(fmap.image.copy(), mesh.triangles.copy(), mesh.boundary_loop.copy(),
                       mesh.refinement_level)
    h = TriMeshMap(img_mesh, mesh.vertices.copy())
    z = np.concatenate([mesh.vertices, mesh.centroids])
    fz = np.concatenate([fmap.image, fmap.image[mesh.triangles].mean(axis=1)])
    tri, bary = locate(img_mesh, fz, hull_tol=hull_tol)
    back = np.sum(h.image[img_mesh.triangles[tri]] * bary, axis=-1)
    return PseudoInverse(h, float(np.max(np.abs(back - z))))


def resample_inverse(fmap: TriMeshMap, target: TriMesh) -> TriMeshMap:
    """Pseudo-inverse of ``fmap`` interpolated onto the vertices of ``target``."""
    h = pseudo_inverse(fmap).map
    return TriMeshMap(target, h(target.vertices))
