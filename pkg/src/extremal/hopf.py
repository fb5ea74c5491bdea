"""Ahlfors-Hopf differential of a mesh map, holomorphy and inner-variation checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .energy import CONST, ZERO_JACOBIAN, DistortionGauge, WeightField
from .mesh import TriMesh, TriMeshMap, dbar_residual, locate


@dataclass(eq=False)
class HopfField:
    phi: np.ndarray  # per triangle
    vertex_phi: np.ndarray
    dbar_l1: float
    l1_norm: float
    mesh: TriMesh

    def summary(self) -> dict:
        return {"l1_norm": self.l1_norm, "dbar_l1": self.dbar_l1,
                "max_abs_phi": float(np.max(np.abs(self.phi))) if len(self.phi) else 0.0}


def area_weighted_vertex_average(mesh: TriMesh, values) -> np.ndarray:
    w = np.repeat(mesh.areas, 3)
    idx = mesh.triangles.ravel()
    vals = np.repeat(np.asarray(values, dtype=complex), 3)
    num = np.bincount(idx, w * vals.real, minlength=mesh.n_vertices) + 1j * np.bincount(
        idx, w * vals.imag, minlength=mesh.n_vertices)
    return num / np.bincount(idx, w, minlength=mesh.n_vertices)


def _ring_pairs(mesh: TriMesh, rings: int = 2):
    key = ("ring_pairs", rings)
    if key not in mesh._cache:
        nv = mesh.n_vertices
        e = mesh.edges
        adj = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                            shape=(nv, nv))
        adj = (adj + sp.identity(nv, format="csr")).tocsr()
        reach = adj
        for _ in range(rings - 1):
            reach = (reach @ adj).tocsr()
        coo = reach.tocoo()
        off = coo.row != coo.col
        mesh._cache[key] = (coo.row[off], coo.col[off])
    return mesh._cache[key]


def nodal_gradients(mesh: TriMesh, values, rings: int = 2):
    """Vertex Wirtinger derivatives ``(u_z, u_zbar)`` of nodal data.

    Each vertex fits a quadratic through its own value by least squares over
    its ``rings``-ring neighbours. For smooth data the recovered gradient is
    second-order accurate, unlike the per-triangle P1 gradient.
    """
    u = np.asarray(values, dtype=complex)
    nv = mesh.n_vertices
    i, j = _ring_pairs(mesh, rings)
    d = mesh.vertices[j] - mesh.vertices[i]
    scale = np.zeros(nv)
    np.maximum.at(scale, i, np.abs(d))
    d = d / scale[i]
    x, y = d.real, d.imag
    rows = np.column_stack([x, y, x * x, x * y, y * y])
    rhs = u[j] - u[i]
    ata = np.empty((nv, 5, 5))
    atb = np.empty((nv, 5), dtype=complex)
    for a in range(5):
        for b in range(a, 5):
            ata[:, a, b] = ata[:, b, a] = np.bincount(i, rows[:, a] * rows[:, b], minlength=nv)
        atb[:, a] = (np.bincount(i, rows[:, a] * rhs.real, minlength=nv)
                     + 1j * np.bincount(i, rows[:, a] * rhs.imag, minlength=nv))
    sol = np.linalg.solve(ata, atb[..., None])[..., 0]
    ux, uy = sol[:, 0] / scale, sol[:, 1] / scale
    return 0.5 * (ux - 1j * uy), 0.5 * (ux + 1j * uy)


CONFORMAL_RTOL = 1e-12  # |h_wbar| below this fraction of |h_w| is rounding


def _phi_values(hw, hwb, hval, gauge, weight):
    a, b = np.abs(hw) ** 2, np.abs(hwb) ** 2
    jac = a - b
    out = np.zeros(len(hw), dtype=complex)
    live = (jac > ZERO_JACOBIAN * (a + b)) & (b > CONFORMAL_RTOL**2 * a)
    k = (a[live] + b[live]) / jac[live]
    out[live] = np.asarray(gauge.deriv(k)) * hw[live] * np.conj(hwb[live]) * weight.eval(hval[live])
    return out


def hopf_density(hmap: TriMeshMap, gauge: DistortionGauge, weight: WeightField = CONST) -> np.ndarray:
    """Per-triangle A'(K) h_w conj(h_wbar) eta(h); zero where h_wbar = 0 or J = 0.

    ``h_wbar`` counts as zero when ``|h_wbar| <= 1e-12 |h_w|``, so exactly
    conformal maps give an exactly vanishing field despite rounding.
    """
    if gauge.deriv is None:
        raise ValueError("gauge derivative unavailable")
    hw, hwb = hmap.derivatives()
    a, b = np.abs(hw) ** 2, np.abs(hwb) ** 2
    jac = a - b
    if np.any(jac < -ZERO_JACOBIAN * (a + b)):
        raise ValueError("map is not orientation preserving")
    hc = hmap.image[hmap.mesh.triangles].mean(axis=1)
    return _phi_values(hw, hwb, hc, gauge, weight)


def hopf_field(hmap: TriMeshMap, gauge: DistortionGauge, weight: WeightField = CONST,
               vertex_mode: str = "nodal") -> HopfField:
    """Ahlfors-Hopf differential of ``hmap`` with its discrete d-bar norm.

    ``phi`` is always the exact per-triangle value. ``vertex_mode`` picks how
    the vertex field fed to the d-bar operator is built:

    ``"nodal"``  Phi evaluated pointwise from quadratically recovered vertex
                 derivatives of h (first-order d-bar decay on this mesh family)
    ``"area"``   area-weighted average of the triangle values (cheap, but
                 stalls under refinement on meshes with irregular vertex stars)
    """
    mesh = hmap.mesh
    phi = hopf_density(hmap, gauge, weight)
    if vertex_mode == "nodal":
        hw, hwb = nodal_gradients(mesh, hmap.image)
        vphi = _phi_values(hw, hwb, hmap.image, gauge, weight)
        if not np.any(phi):
            vphi[:] = 0  # conformal map: keep the exact zero
    elif vertex_mode == "area":
        vphi = area_weighted_vertex_average(mesh, phi)
    else:
        raise ValueError(f"unknown vertex_mode {vertex_mode!r}")
    _, dbar = dbar_residual(vphi, mesh)
    l1 = float(np.sum(np.abs(phi) * mesh.areas))
    return HopfField(phi, vphi, dbar, l1, mesh)


# --- inner variations -----------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """``exp(1 - 1/(1 - s))`` with ``s = |z - center|^2 / radius^2``; 1 at the center."""

    __test__ = False  # not a pytest class

    center: complex
    radius: float

    def __post_init__(self):
        if abs(self.center) + self.radius >= 1:
            raise ValueError("test function support must lie strictly inside the disk")

    def _profile(self, z):
        d = np.asarray(z) - self.center
        s = np.abs(d) ** 2 / self.radius**2
        inside = s < 1
        val = np.zeros(np.shape(s))
        dval = np.zeros(np.shape(s))
        si = s[inside]
        val[inside] = np.exp(1 - 1 / (1 - si))
        dval[inside] = -val[inside] / (1 - si) ** 2
        return d, val, dval

    def __call__(self, z):
        return self._profile(z)[1]

    def dz(self, z):
        d, _, dval = self._profile(z)
        return dval * np.conj(d) / self.radius**2

    def dzbar(self, z):
        d, _, dval = self._profile(z)
        return dval * d / self.radius**2


def default_tests() -> list:
    """Twelve bumps: rings at radii 0.2, 0.45, 0.7 times four angles."""
    tests = []
    for i, r in enumerate((0.2, 0.45, 0.7)):
        for k in range(4):
            ang = k * np.pi / 2 + (np.pi / 4) * (i % 2)
            tests.append(TestFunction(r * np.exp(1j * ang), 0.5 * (1 - r)))
    return tests


def inner_variation_residual(fmap: TriMeshMap, gauge: DistortionGauge, weight: WeightField = CONST,
                             tests=None, side: str = "f_side") -> list:
    """Residuals of the inner-variational equations against each test bump.

    ``f_side``:   |2 int A'(K) conj(mu)/(1+|mu|^2) eta phi_zbar - int A(K) (eta phi)_z|
    ``h_side_p``: |int K^(p-1) h_w conj(h_wbar) eta(h) phi_wbar|
    Integrals use the centroid rule per triangle.
    """
    tests = default_tests() if tests is None else tests
    mesh = fmap.mesh
    c = mesh.centroids
    area = mesh.areas
    fz, fzb = fmap.derivatives()
    a, b = np.abs(fz) ** 2, np.abs(fzb) ** 2
    if side == "f_side":
        k = (a + b) / (a - b)
        mu = fzb / fz
        eta = weight.eval(c)
        h = 1e-6
        deta_dz = 0.5 * ((weight.eval(c + h) - weight.eval(c - h)) / (2 * h)
                         - 1j * (weight.eval(c + 1j * h) - weight.eval(c - 1j * h)) / (2 * h))
        A = np.asarray(gauge.eval(k))
        dA = np.asarray(gauge.deriv(k))
        left = 2 * dA * np.conj(mu) / (1 + np.abs(mu) ** 2) * eta
        out = []
        for t in tests:
            lhs = np.sum(left * t.dzbar(c) * area)
            rhs = np.sum(A * (deta_dz * t(c) + eta * t.dz(c)) * area)
            out.append(float(abs(lhs - rhs)))
        return out
    if side == "h_side_p":
        jac = a - b
        live = jac > ZERO_JACOBIAN * (a + b)
        k = np.ones(len(a))
        k[live] = (a[live] + b[live]) / jac[live]
        hc = fmap.image[mesh.triangles].mean(axis=1)
        if gauge.kind == "power":
            factor = k ** (gauge.p - 1)
        else:
            factor = np.asarray(gauge.deriv(k))
        dens = np.where(live, factor * fz * np.conj(fzb) * weight.eval(hc), 0)
        return [float(abs(np.sum(dens * t.dzbar(c) * area))) for t in tests]
    raise ValueError(f"unknown side {side!r}")


# --- Reich-Strebel --------------------------------------------------------


def reich_strebel_check(phi: HopfField, xi: TriMeshMap, hull_tol: float = 1e-9):
    """Both sides of the Reich-Strebel inequality, ``(lhs, rhs)``.

    lhs = int |Phi|,
    rhs = int sqrt|Phi(xi)| sqrt|Phi| |xi_z - (Phi/|Phi|) xi_zbar|,
    centroid rule on the mesh of ``phi``; ``Phi(xi(c))`` is the value on the
    triangle containing ``xi(c)``. The integrand is zero where Phi is.
    """
    mesh = phi.mesh
    if xi.mesh.n_triangles != mesh.n_triangles or not np.array_equal(xi.mesh.triangles, mesh.triangles):
        raise ValueError("xi and phi must share a mesh")
    area = mesh.areas
    p = phi.phi
    absp = np.abs(p)
    lhs = float(np.sum(absp * area))
    xc = xi.image[mesh.triangles].mean(axis=1)  # xi at centroids
    tri, _ = locate(mesh, xc, hull_tol=hull_tol)
    p_xi = p[tri]
    xz, xzb = xi.derivatives()
    nz = absp > 0
    sign = np.zeros(len(p), dtype=complex)
    sign[nz] = p[nz] / absp[nz]
    integrand = np.sqrt(np.abs(p_xi)) * np.sqrt(absp) * np.abs(xz - sign * xzb)
    integrand[~nz] = 0
    return lhs, float(np.sum(integrand * area))
