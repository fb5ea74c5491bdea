"""Monotone boundary data on the unit circle and the Poisson integral."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .energy import parse_spec

TWO_PI = 2 * np.pi


class InfeasibleInputError(ValueError):
    """Input data violate a precondition (non-monotone boundary, bad mesh...)."""


@dataclass(frozen=True)
class BoundaryData:
    """Circle map ``e^{it} -> e^{i lift(t)}`` with ``lift(t + 2pi) = lift(t) + 2pi``.

    ``lift`` must be nondecreasing; strictly increasing data are homeomorphic.
    """

    lift: Callable = field(compare=False)
    spec: dict = field(default_factory=dict)

    def __call__(self, z):
        return np.exp(1j * self.lift(np.angle(z)))

    def values_at(self, theta):
        return np.exp(1j * self.lift(np.asarray(theta, dtype=float)))

    def samples(self, mesh) -> np.ndarray:
        """Boundary values at the mesh boundary loop, in loop order."""
        theta = np.angle(mesh.vertices[mesh.boundary_loop])
        theta = np.mod(theta, TWO_PI)
        self.check_monotone(theta)
        return self.values_at(theta)

    def monotonicity(self, theta=None):
        """``(weakly_monotone, strictly_monotone)`` on a sample grid."""
        if theta is None:
            theta = np.linspace(0, TWO_PI, 4097)
        else:
            theta = np.sort(np.mod(theta, TWO_PI))
            theta = np.r_[theta, theta[0] + TWO_PI]
        lv = self.lift(theta)
        d = np.diff(lv)
        total = lv[-1] - lv[0]
        period_ok = abs(self.lift(np.array([0.0]))[0] + TWO_PI - self.lift(np.array([TWO_PI]))[0]) < 1e-9
        weak = bool(np.all(d >= -1e-14) and period_ok and total <= TWO_PI + 1e-9)
        return weak, bool(weak and np.all(d > 0))

    @property
    def monotone_flag(self) -> bool:
        return self.monotonicity()[1]

    def check_monotone(self, theta=None, strict=False):
        weak, strong = self.monotonicity()
        if theta is not None:
            w2, s2 = self.monotonicity(theta)
            weak, strong = weak and w2, strong and s2
        if not weak or (strict and not strong):
            raise InfeasibleInputError(f"boundary data {self.spec or ''} are not monotone")

    def inverse(self) -> "BoundaryData":
        """Boundary data of the inverse circle map (needs strict monotonicity)."""
        self.check_monotone(strict=True)
        lift = self.lift
        shift = float(lift(np.array([0.0]))[0])

        def inv(t):
            t = np.asarray(t, dtype=float)
            # reduce into one period of the lift's range
            k = np.floor((t - shift) / TWO_PI)
            s = t - k * TWO_PI
            lo = np.full(s.shape, -TWO_PI)
            hi = np.full(s.shape, 2 * TWO_PI)
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                below = lift(mid) < s
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            return 0.5 * (lo + hi) + k * TWO_PI

        spec = {"kind": "inverse", "of": dict(self.spec)}
        return BoundaryData(inv, spec)

    def rotated(self, angle: float) -> "BoundaryData":
        lift = self.lift
        return BoundaryData(lambda t: lift(t) + angle, {"kind": "rotated", "angle": angle, "of": dict(self.spec)})


def boundary_from_spec(spec) -> BoundaryData:
    """Build boundary data from ``"sin:a=0.3"``, ``"id"``, ``"mobius:a=0.3"``...

    ``sin:a,k``   theta + a sin(k theta)          (monotone when a k < 1)
    ``mobius:a``  z -> (z - a)/(1 - conj(a) z)    for real ``a``, |a| < 1
    ``rot:t``     theta + t
    """
    if isinstance(spec, BoundaryData):
        return spec
    if isinstance(spec, str):
        spec = parse_spec(spec)
    spec = dict(spec)
    kind = spec.get("kind", "id")
    if kind in ("id", "identity"):
        lift = lambda t: np.asarray(t, dtype=float) * 1.0
    elif kind == "sin":
        a = float(spec.get("a", 0.3))
        k = float(spec.get("k", 1))
        lift = lambda t: np.asarray(t, dtype=float) + a * np.sin(k * np.asarray(t, dtype=float))
    elif kind == "rot":
        s = float(spec.get("t", 0.0))
        lift = lambda t: np.asarray(t, dtype=float) + s
    elif kind == "mobius":
        a = float(spec.get("a", 0.3))
        if not abs(a) < 1:
            raise InfeasibleInputError("mobius parameter must satisfy |a| < 1")

        def lift(t):
            t = np.asarray(t, dtype=float)
            z = np.exp(1j * t)
            w = (z - a) / (1 - a * z)
            # continuous branch: arg(w) - t is continuous and periodic
            return t + np.angle(w * np.exp(-1j * t))
    else:
        raise InfeasibleInputError(f"unknown boundary kind {kind!r}")
    bd = BoundaryData(lift, spec)
    bd.check_monotone()
    return bd


def poisson_extension(boundary, points, n_quad: int | None = None) -> np.ndarray:
    """Harmonic extension of circle data by trapezoidal Poisson-kernel quadrature.

    ``(1/2pi) int (1 - |w|^2)/|w - e^{it}|^2 g(e^{it}) dt``. The node count
    is chosen per point from its distance to the circle so the periodic
    trapezoid rule is converged; points on the circle return ``g`` itself.
    """
    if isinstance(boundary, BoundaryData):
        g = boundary.values_at
    else:
        g = boundary
    w = np.atleast_1d(np.asarray(points, dtype=complex))
    out = np.empty(w.shape, dtype=complex)
    r = np.abs(w)
    on = r >= 1 - 1e-14
    out[on] = g(np.angle(w[on]))
    inside = np.flatnonzero(~on)
    if n_quad is None:
        delta = np.maximum(1 - r[inside], 1e-6)
        m = 2 ** np.ceil(np.log2(np.clip(60.0 / delta, 256, 2**17))).astype(int)
    else:
        m = np.full(len(inside), int(n_quad))
    for mq in np.unique(m):
        sel = inside[m == mq]
        t = TWO_PI * np.arange(mq) / mq
        e = np.exp(1j * t)
        gv = g(t)
        chunk = max(1, 4_000_000 // mq)
        for s in range(0, len(sel), chunk):
            idx = sel[s:s + chunk]
            ww = w[idx][:, None]
            ker = (1 - np.abs(ww) ** 2) / np.abs(ww - e[None, :]) ** 2
            out[idx] = ker @ gv / mq
    return out
