"""Disk automorphisms, Fuchsian test groups and Poincare-series weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, TriMeshMap, build_disk_mesh

TWO_PI = 2 * np.pi


class DomainError(RuntimeError):
    """The group has no compact fundamental polygon to integrate over."""


# --- Mobius transforms ----------------------------------------------------


@dataclass(frozen=True)
class MobiusTransform:
    """Disk automorphism ``z -> (A z + B)/(conj(B) z + conj(A))``, ``|A|^2 - |B|^2 = 1``."""

    A: complex
    B: complex

    def __post_init__(self):
        det = abs(self.A) ** 2 - abs(self.B) ** 2
        if not det > 0:
            raise ValueError("not an automorphism of the unit disk")
        s = np.sqrt(det)
        object.__setattr__(self, "A", complex(self.A) / s)
        object.__setattr__(self, "B", complex(self.B) / s)

    @classmethod
    def from_coefficients(cls, a: complex, theta: float = 0.0) -> "MobiusTransform":
        """``z -> e^{i theta} (z - a)/(1 - conj(a) z)``."""
        if not abs(a) < 1:
            raise ValueError("|a| must be < 1")
        e = np.exp(0.5j * theta)
        return cls(e, -a * e)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0)

    @classmethod
    def rotation(cls, phi: float):
        return cls(np.exp(0.5j * phi), 0.0)

    @classmethod
    def translation(cls, length: float, phi: float = 0.0):
        """Hyperbolic translation by ``length`` along the diameter at angle ``phi``."""
        c, s = np.cosh(length / 2), np.sinh(length / 2)
        return cls(c, s * np.exp(1j * phi))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B], [np.conj(self.B), np.conj(self.A)]])

    def __call__(self, z):
        z = np.asarray(z)
        return (self.A * z + self.B) / (np.conj(self.B) * z + np.conj(self.A))

    def derivative(self, z):
        return 1.0 / (np.conj(self.B) * np.asarray(z) + np.conj(self.A)) ** 2

    def __matmul__(self, other: "MobiusTransform") -> "MobiusTransform":
        m = self.matrix @ other.matrix
        return MobiusTransform(m[0, 0], m[0, 1])

    def inverse(self) -> "MobiusTransform":
        return MobiusTransform(np.conj(self.A), -self.B)

    def translation_length(self) -> float:
        tr = 2 * abs(self.A.real)
        return float(2 * np.arccosh(tr / 2)) if tr > 2 else 0.0


# --- groups ---------------------------------------------------------------


@dataclass(eq=False)
class FundamentalDomain:
    mesh: TriMesh
    diameter: float  # hyperbolic
    compact: bool = True

    def projection_integral(self, rho=1.0) -> float:
        """Centroid rule for ``int_P rho(z) dz / (1 - |z|^2)^2``; ``rho`` per triangle or scalar."""
        c = self.mesh.centroids
        return float(np.sum(np.asarray(rho) * self.mesh.areas / (1 - np.abs(c) ** 2) ** 2))

    def hyperbolic_area(self) -> float:
        """Area in the curvature -1 metric ``2|dz|/(1 - |z|^2)``."""
        return 4 * self.projection_integral()


class Elements(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    length: np.ndarray  # word length of each element
    words: list

    def __len__(self):
        return len(self.A)

    def apply(self, z):
        z = np.asarray(z)[None, ...]
        A = self.A.reshape((-1,) + (1,) * (z.ndim - 1))
        B = self.B.reshape(A.shape)
        return (A * z + B) / (np.conj(B) * z + np.conj(A))

    def deriv_abs2(self, z):
        z = np.asarray(z)[None, ...]
        A = self.A.reshape((-1,) + (1,) * (z.ndim - 1))
        B = self.B.reshape(A.shape)
        return 1.0 / np.abs(np.conj(B) * z + np.conj(A)) ** 4

    def counts(self, cutoff):
        return np.array([int(np.sum(self.length <= n)) for n in range(cutoff + 1)])


@dataclass(eq=False)
class FuchsianGroup:
    """Group generated by disk automorphisms; words enumerated up to a length."""

    generators: list
    name: str = "group"
    parameters: dict = field(default_factory=dict)
    _elements: dict = field(default_factory=dict, repr=False)
    _domains: dict = field(default_factory=dict, repr=False)

    @property
    def letters(self) -> list:
        # letter 2k is generator k, letter 2k+1 its inverse
        out = []
        for g in self.generators:
            out += [g, g.inverse()]
        return out

    def elements(self, cutoff: int) -> Elements:
        """Distinct group elements of word length <= cutoff.

        Words are freely reduced; elements that coincide as maps (relations)
        are merged, keeping the shortest word.
        """
        if cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        if cutoff in self._elements:
            return self._elements[cutoff]
        letters = self.letters
        LA = np.array([g.A for g in letters])
        LB = np.array([g.B for g in letters])
        A, B = np.array([1.0 + 0j]), np.array([0j])
        lengths = [0]
        words = [()]
        last = np.array([-1])
        shell = np.array([0])
        for n in range(1, cutoff + 1):
            if not letters:
                break
            par = np.repeat(shell, len(letters))
            let = np.tile(np.arange(len(letters)), len(shell))
            inv = np.where(let % 2 == 0, let + 1, let - 1)
            ok = last[par] != inv
            par, let = par[ok], let[ok]
            # (A, B) of product parent @ letter
            pa, pb = A[par], B[par]
            na = pa * LA[let] + pb * np.conj(LB[let])
            nb = pa * LB[let] + pb * np.conj(LA[let])
            keep = _new_elements(A, B, na, nb)
            na, nb, par, let = na[keep], nb[keep], par[keep], let[keep]
            start = len(A)
            A, B = np.r_[A, na], np.r_[B, nb]
            last = np.r_[last, let]
            lengths += [n] * len(na)
            words += [words[p] + (int(l),) for p, l in zip(par, let)]
            shell = np.arange(start, len(A))
        el = Elements(A, B, np.array(lengths), words)
        self._elements[cutoff] = el
        return el

    def fundamental_domain(self, refinement: int = 2) -> FundamentalDomain:
        if refinement not in self._domains:
            kind = self.parameters.get("kind", self.name)
            if kind == "trivial":
                mesh = build_disk_mesh(16, refinement)
                self._domains[refinement] = FundamentalDomain(mesh, np.inf, compact=False)
            elif kind == "octagon":
                self._domains[refinement] = _octagon_domain(refinement)
            else:
                raise DomainError(f"group {self.name!r} has no compact fundamental polygon")
        return self._domains[refinement]


def _new_elements(A, B, na, nb, rtol=1e-9):
    """Mask of candidates that are new, merging +-M and near-duplicates."""
    def key(a, b):
        return np.column_stack([a.real, a.imag, b.real, b.imag])

    old = cKDTree(key(A, B))
    cand = key(na, nb)
    scale = rtol * (1 + np.abs(na))
    keep = np.ones(len(na), dtype=bool)
    for sgn in (1, -1):
        d, _ = old.query(sgn * cand, distance_upper_bound=float(scale.max()) + 1e-300)
        keep &= ~(d <= scale)
    idx = np.flatnonzero(keep)
    if len(idx) > 1:
        tree = cKDTree(cand[idx])
        for sgn in (1, -1):
            hits = tree.query_ball_point(sgn * cand[idx], r=scale[idx])
            for i, h in enumerate(hits):
                if keep[idx[i]] and any(j < i for j in h):
                    keep[idx[i]] = False
    return keep


def trivial_group() -> FuchsianGroup:
    return FuchsianGroup([], "trivial", {"kind": "trivial"})


def cyclic_group(length: float = 1.0) -> FuchsianGroup:
    """Hyperbolic cyclic group translating along the real diameter."""
    return FuchsianGroup([MobiusTransform.translation(length, 0.0)], "cyclic",
                         {"kind": "cyclic", "length": length})


def octagon_constants() -> dict:
    """Regular octagon with interior angles pi/4."""
    inradius = float(np.arccosh(1 / np.tan(np.pi / 8)))
    circumradius = float(np.arccosh(1 / np.tan(np.pi / 8) ** 2))
    return {
        "inradius": inradius,
        "circumradius": circumradius,
        "midpoint_radius": float(np.tanh(inradius / 2)),
        "vertex_radius": float(np.tanh(circumradius / 2)),
    }


def octagon_group() -> FuchsianGroup:
    """Genus-two surface group pairing opposite sides of the regular octagon."""
    c = octagon_constants()
    gens = [MobiusTransform.translation(2 * c["inradius"], k * np.pi / 4) for k in range(4)]
    return FuchsianGroup(gens, "octagon", {"kind": "octagon"})


def group_from_spec(spec) -> FuchsianGroup:
    if isinstance(spec, FuchsianGroup):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "trivial":
        return trivial_group()
    if kind == "cyclic":
        return cyclic_group(float(spec.get("length", 1.0)))
    if kind == "octagon":
        return octagon_group()
    raise ValueError(f"unknown group kind {kind!r}")


def _octagon_domain(refinement: int) -> FundamentalDomain:
    c = octagon_constants()
    m = c["midpoint_radius"]
    C = (1 + m * m) / (2 * m)  # centre distance of each side's orthogonal circle

    def boundary_radius(phi):
        k = np.rint(phi / (np.pi / 4))
        psi = phi - k * np.pi / 4
        cp = C * np.cos(psi)
        return cp - np.sqrt(cp * cp - 1)

    n = 4 * 2**refinement
    pts, tris = [], []
    for s in range(16):
        p0, p1 = s * np.pi / 8, (s + 1) * np.pi / 8
        index = {}
        for i in range(n + 1):
            for j in range(i + 1):
                phi = p0 + (p1 - p0) * (j / i if i else 0)
                index[i, j] = len(pts)
                pts.append((i / n) * boundary_radius(phi) * np.exp(1j * phi))
        for i in range(n):
            for j in range(i + 1):
                tris.append((index[i, j], index[i + 1, j], index[i + 1, j + 1]))
                if j < i:
                    tris.append((index[i, j], index[i + 1, j + 1], index[i, j + 1]))
    pts = np.array(pts)
    # merge copies of shared sector edges
    key = np.round(pts.real * 1e11) + 1j * np.round(pts.imag * 1e11)
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    verts = pts[first]
    tris = inv[np.array(tris)]
    z = verts[tris]
    area = ((z[:, 1] - z[:, 0]) * np.conj(z[:, 2] - z[:, 0])).imag
    tris = np.where((area > 0)[:, None], tris[:, [0, 2, 1]], tris)
    on_edge = np.abs(np.abs(verts) - boundary_radius(np.mod(np.angle(verts), TWO_PI))) < 1e-12
    loop = np.flatnonzero(on_edge)
    loop = loop[np.argsort(np.mod(np.angle(verts[loop]), TWO_PI))]
    mesh = TriMesh(verts, tris, loop, refinement)
    return FundamentalDomain(mesh, 2 * c["circumradius"], compact=True)


# --- Poincare series ------------------------------------------------------


class WeightValue(NamedTuple):
    value: np.ndarray
    tail_estimate: np.ndarray


@dataclass(eq=False)
class PoincareWeight:
    """Truncated series ``sum_{|word| <= N} (1 - |gamma(z)|^2)^2``."""

    group: FuchsianGroup
    cutoff: int

    @property
    def elements(self) -> Elements:
        return self.group.elements(self.cutoff)

    def _terms(self, z):
        z = np.asarray(z, dtype=complex)
        el = self.elements
        out = np.zeros(z.shape)
        last = np.zeros(z.shape)
        chunk = max(1, 2_000_000 // max(z.size, 1))
        for s in range(0, len(el), chunk):
            sub = Elements(el.A[s:s + chunk], el.B[s:s + chunk], el.length[s:s + chunk], [])
            t = (1 - np.abs(sub.apply(z)) ** 2) ** 2
            out += t.sum(axis=0)
            last += t[sub.length == self.cutoff].sum(axis=0)
        return out, last

    def __call__(self, z):
        return self._terms(z)[0]

    def tail(self, z):
        return self._terms(z)[1]

    def density(self, z):
        """``alpha_N(z) / (1 - |z|^2)^2 = sum |gamma'(z)|^2``, finite up to the circle."""
        z = np.asarray(z, dtype=complex)
        el = self.elements
        out = np.zeros(z.shape)
        last = np.zeros(z.shape)
        chunk = max(1, 2_000_000 // max(z.size, 1))
        for s in range(0, len(el), chunk):
            sub = Elements(el.A[s:s + chunk], el.B[s:s + chunk], el.length[s:s + chunk], [])
            t = sub.deriv_abs2(z)
            out += t.sum(axis=0)
            last += t[sub.length == self.cutoff].sum(axis=0)
        return out, last


def poincare_weight(z, group, cutoff: int) -> WeightValue:
    """Truncated Poincare weight at ``z`` with the last-shell contribution as tail estimate."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ValueError("points must lie in the open unit disk")
    val, last = PoincareWeight(group_from_spec(group), cutoff)._terms(z)
    return WeightValue(val, last)


def automorphy_error(weight: PoincareWeight, sample_points, test_elements) -> float:
    """``max |alpha_N(beta(z)) - alpha_N(z)|`` over samples and test elements."""
    z = np.asarray(sample_points, dtype=complex)
    base = weight(z)
    err = 0.0
    for beta in test_elements:
        err = max(err, float(np.max(np.abs(weight(beta(z)) - base))))
    return err


# --- transfer identity ----------------------------------------------------


@dataclass
class TransferResult:
    lhs: float
    rhs: float
    lhs_tail: float
    rhs_tail: float
    n_elements: int

    @property
    def tail(self) -> float:
        return self.lhs_tail + self.rhs_tail

    def as_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "lhs_tail": self.lhs_tail, "rhs_tail": self.rhs_tail,
                "n_elements": self.n_elements}


def transfer_identity_check(f: TriMeshMap, p: float, group, cutoff: int) -> TransferResult:
    """Both sides of the energy-transfer identity for ``K^p``.

    lhs: centroid rule over the fundamental polygon of
         ``K^p alpha_N(z) / (1 - |z|^2)^2``;
    rhs: sum over elements of ``K^p`` times the area of the image of each
         triangle under the element (straight image triangles).
    ``f`` must live on the group's fundamental-domain mesh.
    """
    group = group_from_spec(group)
    mesh = f.mesh
    fz, fzb = f.derivatives()
    a, b = np.abs(fz) ** 2, np.abs(fzb) ** 2
    if np.any(a - b <= 0):
        raise ValueError("f must be orientation preserving")
    kp = ((a + b) / (a - b)) ** p
    if group.parameters.get("kind") == "cyclic":
        raise DomainError("cyclic group has no compact fundamental polygon")
    w = PoincareWeight(group, cutoff)
    dens, dens_last = w.density(mesh.centroids)
    lhs = float(np.sum(kp * dens * mesh.areas))
    lhs_tail = float(np.sum(kp * dens_last * mesh.areas))
    el = w.elements
    rhs = rhs_tail = 0.0
    tri = mesh.triangles
    chunk = max(1, 4_000_000 // max(mesh.n_vertices, 1))
    for s in range(0, len(el), chunk):
        sub = Elements(el.A[s:s + chunk], el.B[s:s + chunk], el.length[s:s + chunk], [])
        img = sub.apply(mesh.vertices)
        z = img[:, tri]
        area = 0.5 * (np.conj(z[..., 1] - z[..., 0]) * (z[..., 2] - z[..., 0])).imag
        contrib = area @ kp
        rhs += float(contrib.sum())
        rhs_tail += float(contrib[sub.length == cutoff].sum())
    return TransferResult(lhs, rhs, lhs_tail, rhs_tail, len(el))


def automorphic_phi_l1_growth(phi_on_P, group, cutoff: int, domain: FundamentalDomain | None = None,
                              rtol: float = 1e-9):
    """Partial sums ``sum_{|word| <= n} int_{gamma(P)} |Phi|`` for ``n = 0..N``.

    ``Phi`` is the automorphic extension of a per-triangle field on ``P``;
    each tile is integrated in pulled-back form, ``|Phi(gamma w)| |gamma'(w)|^2``.
    Returns ``(partial_sums, element_counts)``.
    """
    group = group_from_spec(group)
    domain = domain or group.fundamental_domain()
    mesh = domain.mesh
    phi = np.asarray(phi_on_P, dtype=complex)
    if phi.shape != (mesh.n_triangles,):
        raise ValueError("phi must be given per triangle of the fundamental-domain mesh")
    el = group.elements(cutoff)
    c = mesh.centroids
    per_tile = np.empty(len(el))
    for k in range(len(el)):
        dg = 1.0 / (np.conj(el.B[k]) * c + np.conj(el.A[k])) ** 2
        ext = phi / dg**2  # automorphic value at gamma(c)
        per_tile[k] = np.sum(np.abs(ext) * np.abs(dg) ** 2 * mesh.areas)
    sums = np.array([per_tile[el.length <= n].sum() for n in range(cutoff + 1)])
    counts = el.counts(cutoff)
    base = float(np.sum(np.abs(phi) * mesh.areas))
    if np.any(np.abs(sums - counts * base) > rtol * max(base, 1e-300) * counts):
        raise ArithmeticError("partial sums are not proportional to element counts")
    return sums, counts
