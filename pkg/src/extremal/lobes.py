"""Lobes of the difference of two monotone circle maps.

For lifts ``alpha``, ``beta`` the curve ``gamma = e^{i alpha} - e^{i beta}``
equals ``2i sin((alpha-beta)/2) e^{i(alpha+beta)/2}``; between consecutive
coincidences it traces a lobe whose argument is monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import InfeasibleInputError, boundary_from_spec

TWO_PI = 2 * np.pi


class LobeInvariantError(ArithmeticError):
    """A lobe identity failed beyond its tolerance."""


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    """Two monotone lifts sampled on ``theta_j = 2 pi j / n``.

    Each lift must be nondecreasing with total increase ``2 pi`` over one
    period. The normalization ``alpha(0) = beta(0) = 0`` is conventional but
    not enforced.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or len(a) < 8:
            raise InfeasibleInputError("alpha and beta must be 1-d samples of equal length >= 8")
        for name, v in (("alpha", a), ("beta", b)):
            steps = np.diff(np.r_[v, v[0] + TWO_PI])
            if np.any(steps < -1e-12):
                raise InfeasibleInputError(f"{name} samples are not nondecreasing")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def n_samples(self) -> int:
        return len(self.alpha)

    @property
    def theta(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_samples) / self.n_samples

    @classmethod
    def from_maps(cls, alpha, beta, n_samples: int = 4096) -> "BoundaryPair":
        """Sample two boundary specs (``"sin:a=0.4"``, ``"id"``, callables...)."""
        theta = TWO_PI * np.arange(n_samples) / n_samples
        vals = []
        for m in (alpha, beta):
            lift = m if callable(m) and not hasattr(m, "lift") else boundary_from_spec(m).lift
            vals.append(np.asarray(lift(theta), dtype=float))
        return cls(*vals)

    def curve(self) -> np.ndarray:
        return np.exp(1j * self.alpha) - np.exp(1j * self.beta)


@dataclass(eq=False)
class Lobe:
    param_interval: tuple  # (theta_1, theta_2), theta_2 may exceed 2 pi when wrapping
    theta: np.ndarray
    curve: np.ndarray  # gamma at interior samples
    sign: int
    varg: float
    tilde_theta: tuple
    monotone_violations: int
    radial_delta: np.ndarray
    radial_r: np.ndarray
    segment_failures: int = 0
    closed: bool = False  # no coincidences at all: the lobe is the whole curve

    def polygon(self) -> np.ndarray:
        """Closed boundary polygon: the sampled curve joined through 0."""
        if self.closed:
            return self.curve
        return np.r_[0.0, self.curve, 0.0]

    def centroid(self) -> complex:
        p = self.polygon()
        q = np.roll(p, -1)
        cr = (np.conj(p) * q).imag
        area = cr.sum() / 2
        return complex(((p + q) * cr).sum() / (6 * area))

    def as_dict(self) -> dict:
        return {"param_interval": list(self.param_interval), "sign": self.sign, "varg": self.varg,
                "tilde_theta": list(self.tilde_theta), "monotone_violations": self.monotone_violations,
                "segment_failures": self.segment_failures, "n_samples": len(self.theta)}


@dataclass(eq=False)
class LobeDecomposition:
    pair: BoundaryPair
    coincidence: list  # (theta_start, theta_end) per component; points have start == end
    lobes: list
    X_measure: float
    tol: float
    radial_jump: float = 0.0
    radial_modulus: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.pair.n_samples

    @property
    def continuity_ok(self) -> bool:
        return self.radial_jump <= self.radial_modulus + 1e-12

    def as_dict(self) -> dict:
        return {"n_samples": self.n_samples, "tol": self.tol, "X_measure": self.X_measure,
                "coincidence": [list(c) for c in self.coincidence],
                "lobes": [lb.as_dict() for lb in self.lobes],
                "radial_jump": self.radial_jump, "radial_modulus": self.radial_modulus}


# --- winding numbers ------------------------------------------------------


def _closed(curve):
    c = np.asarray(curve, dtype=complex)
    return c if c[0] == c[-1] else np.r_[c, c[0]]


def distance_to_curve(curve, points) -> np.ndarray:
    c = _closed(curve)
    a, b = c[:-1], c[1:]
    x = np.atleast_1d(np.asarray(points, dtype=complex))[:, None]
    ab = b - a
    L2 = np.abs(ab) ** 2
    t = np.where(L2 > 0, ((x - a) * np.conj(ab)).real / np.where(L2 > 0, L2, 1), 0)
    t = np.clip(t, 0, 1)
    return np.min(np.abs(x - (a + t * ab)), axis=1)


def winding_numbers(curve, points) -> np.ndarray:
    """Winding numbers of a closed polyline about several points (no on-curve check)."""
    c = _closed(curve)
    x = np.atleast_1d(np.asarray(points, dtype=complex))
    out = np.empty(len(x))
    chunk = max(1, 2_000_000 // len(c))
    for s in range(0, len(x), chunk):
        rel = c[None, :] - x[s:s + chunk, None]
        out[s:s + chunk] = np.angle(rel[:, 1:] / rel[:, :-1]).sum(axis=1) / TWO_PI
    return np.rint(out).astype(int)


def winding_number(curve, x: complex, tol: float = 1e-12) -> int:
    """Total argument increase of ``curve - x`` over ``2 pi``; the curve is closed implicitly."""
    if distance_to_curve(curve, [x])[0] <= tol:
        raise ValueError("point lies on the curve")
    return int(winding_numbers(curve, [x])[0])


# --- decomposition --------------------------------------------------------


def _runs(mask):
    """Maximal cyclic runs of True as (start, end) with ``end`` possibly >= n."""
    n = len(mask)
    if not mask.any():
        return []
    edges = np.diff(np.r_[0, mask.astype(int), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    runs = list(zip(starts.tolist(), ends.tolist()))
    if len(runs) > 1 and mask[0] and mask[-1]:
        s0, e0 = runs.pop(0)
        s1, _ = runs.pop()
        runs.append((s1, e0 + n))
    return runs


def decompose_lobes(pair: BoundaryPair, tol: float = 1e-9, segment_checks: int = 32) -> LobeDecomposition:
    """Split the difference curve into lobes between coincidences.

    Coincidences are samples with ``|alpha - beta| <= tol`` (merged into
    cyclic runs) plus linearly interpolated sign changes of ``alpha - beta``.
    ``X_measure`` is the image length of the coincidence runs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = pair.n_samples
    theta = pair.theta
    a, b = pair.alpha, pair.beta
    # one extra period for wrap-around indexing
    ae, be = np.r_[a, a + TWO_PI], np.r_[b, b + TWO_PI]
    te = np.r_[theta, theta + TWO_PI]
    me = 0.5 * (ae + be)
    d = a - b
    mask = np.abs(d) <= tol

    def interp(arr, p):
        j = int(np.floor(p))
        f = p - j
        return arr[j] if f == 0 else (1 - f) * arr[j] + f * arr[j + 1]

    if mask.all():
        return LobeDecomposition(pair, [(0.0, TWO_PI)], [], TWO_PI, tol)

    comps = [(float(s), float(e)) for s, e in _runs(mask)]
    dn = np.r_[d, d[0]]
    for j in range(n):
        if not mask[j] and not mask[(j + 1) % n] and dn[j] * dn[j + 1] < 0:
            p = j + dn[j] / (dn[j] - dn[j + 1])
            comps.append((p, p))
    comps.sort()

    gam = 2j * np.sin(0.5 * (ae - be)) * np.exp(1j * me)
    lobes = []
    x_measure = 0.0
    coincidence = []
    for s, e in comps:
        x_measure += interp(me, e) - interp(me, s)
        coincidence.append((interp(te, s), interp(te, e)))

    if not comps:
        idx = np.arange(n + 1)
        args = np.unwrap(np.angle(gam[idx]))
        lobes.append(_make_lobe(te[idx[:-1]], gam[:n], args, (0.0, TWO_PI), int(np.sign(d[0])),
                                (me[0], me[n]), closed=True))
    else:
        for k, (s, e) in enumerate(comps):
            s_next = comps[(k + 1) % len(comps)][0] + (n if k + 1 == len(comps) else 0)
            idx = np.arange(int(np.floor(e)) + 1, int(np.ceil(s_next)))
            if len(idx) == 0:
                continue
            sgn = int(np.sign(d[idx[0] % n]))
            m1, m2 = interp(me, e), interp(me, s_next)
            ends = 1j * sgn * np.exp(1j * np.array([m1, m2]))
            args = np.unwrap(np.angle(np.r_[ends[0], gam[idx], ends[1]]))
            lobes.append(_make_lobe(te[idx], gam[idx], args, (interp(te, e), interp(te, s_next)), sgn,
                                    (m1, m2)))

    for lb in lobes:
        lb.segment_failures = _segment_failures(lb, segment_checks)
    jump, modulus = _radial_continuity(lobes, ae, be)
    return LobeDecomposition(pair, coincidence, lobes, float(x_measure), tol, jump, modulus)


def _make_lobe(theta, curve, args, interval, sign, tilde, closed=False):
    steps = np.diff(args)
    # tiny negative steps are rounding, not reversals
    violations = int(np.sum(steps < -1e-12))
    inner = args if closed else args[1:-1]
    return Lobe(tuple(float(t) for t in interval), theta, curve, sign, float(args[-1] - args[0]),
                (float(tilde[0]), float(tilde[1])), violations, inner[: len(curve)], np.abs(curve),
                closed=closed)


def _segment_failures(lobe: Lobe, checks: int) -> int:
    """Count sampled points r e^{i delta} whose half-radius point is outside the lobe."""
    if checks <= 0 or len(lobe.curve) == 0:
        return 0
    pick = np.unique(np.linspace(0, len(lobe.curve) - 1, min(checks, len(lobe.curve))).astype(int))
    pts = 0.5 * lobe.curve[pick]
    poly = lobe.polygon()
    far = distance_to_curve(poly, pts) > 1e-12 * max(1.0, np.max(np.abs(poly)))
    wn = winding_numbers(poly, pts[far])
    return int(np.sum(wn == 0))


def _radial_continuity(lobes, ae, be):
    """Largest adjacent jump of r along lobes and the sampling modulus bounding it."""
    jump = 0.0
    for lb in lobes:
        r = np.r_[0.0, lb.radial_r, 0.0] if not lb.closed else np.r_[lb.radial_r, lb.radial_r[0]]
        if len(r) > 1:
            jump = max(jump, float(np.max(np.abs(np.diff(r)))))
    # |delta gamma| <= |delta alpha| + |delta beta| per step; endpoint steps at most two of them
    modulus = 2 * float(np.max(np.diff(ae) + np.diff(be)))
    return jump, modulus


def total_varg(decomp: LobeDecomposition, tol: float | None = None) -> float:
    """Sum of per-lobe variations of argument, checked against ``2 pi - |X|``."""
    tol = 10.0 / decomp.n_samples if tol is None else tol
    total = float(sum(lb.varg for lb in decomp.lobes))
    if total > TWO_PI + tol:
        raise LobeInvariantError(f"total variation of argument {total} exceeds 2 pi")
    if abs(total - (TWO_PI - decomp.X_measure)) > tol:
        raise LobeInvariantError(f"total variation {total} differs from 2 pi - |X| = {TWO_PI - decomp.X_measure}")
    return total


def lobe_containing(decomp: LobeDecomposition, x: complex):
    """Index of the lobe whose polygon winds around ``x``, else ``None``."""
    for i, lb in enumerate(decomp.lobes):
        if winding_numbers(lb.polygon(), [x])[0] != 0:
            return i
    return None


def tan_arg_rate(alpha, beta, dalpha, dbeta):
    """Closed-form derivative of ``tan(arg(e^{i alpha} - e^{i beta}))`` in theta."""
    return (dalpha + dbeta) * (1 - np.cos(alpha - beta)) / (np.cos(alpha) - np.cos(beta)) ** 2


# --- random monotone pairs ------------------------------------------------


def _window(theta, start, length, ramp):
    """Smooth periodic window: 0 on [start, start + length], 1 away from it."""
    u = np.mod(theta - start, TWO_PI)
    w = np.ones_like(u)
    w[u <= length] = 0
    up = (u > length) & (u < length + ramp)
    down = u > TWO_PI - ramp
    w[up] = np.sin(0.5 * np.pi * (u[up] - length) / ramp) ** 2
    w[down] = np.sin(0.5 * np.pi * (TWO_PI - u[down]) / ramp) ** 2
    return w


def random_monotone_pair(rng, n_samples: int = 4096, n_terms: int = 4, arc: float = 0.0,
                         budget: float = 0.9) -> BoundaryPair:
    """Pair ``theta + P(theta)`` with P a random trigonometric polynomial.

    ``sum k (|a_k| + |b_k|) < budget`` keeps each lift strictly increasing.
    With ``arc > 0`` both perturbations are multiplied by a window vanishing
    on an arc of that length, so the maps coincide there.
    """
    theta = TWO_PI * np.arange(n_samples) / n_samples
    k = np.arange(1, n_terms + 1)
    start = rng.uniform(0, TWO_PI)
    lifts = []
    for _ in range(2):
        c = rng.normal(size=(2, n_terms)) / k
        c *= rng.uniform(0.2, 1.0) * budget / np.sum(k * np.abs(c))

        def pert(t, c=c):
            t = np.asarray(t)[..., None]
            return np.sum(c[0] * np.sin(k * t) + c[1] * (np.cos(k * t) - 1), axis=-1)

        p = pert(theta)
        if arc > 0:
            ramp = 0.5
            fine = np.linspace(0, TWO_PI, 8 * n_samples + 1)
            w = _window(fine, start, arc, ramp)
            pf = pert(fine)
            slope = np.diff(w * pf) / np.diff(fine)
            worst = np.max(-slope)
            scale = min(1.0, budget / worst) if worst > 0 else 1.0
            p = scale * _window(theta, start, arc, ramp) * p
        lifts.append(theta + p)
    return BoundaryPair(*lifts)
