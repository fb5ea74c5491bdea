"""Distortion gauges, weights and the forward / inverse distortion energies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import DerivativeSample, OrientationError, TriMesh, TriMeshMap, apply_operator

# J <= ZERO_JACOBIAN * (|h_w|^2 + |h_wbar|^2) counts as a collapsed triangle
ZERO_JACOBIAN = 1e-13


class SingularSampleError(ValueError):
    pass


# --- gauges ---------------------------------------------------------------


@dataclass(frozen=True)
class DistortionGauge:
    """Convex increasing ``A: [1, inf) -> [1, inf)`` with its derivative."""

    kind: str
    p: float
    eval: Callable = field(compare=False)
    deriv: Callable = field(compare=False)
    name: str = ""

    @property
    def sobolev_exponent(self):
        if self.kind != "power":
            return None
        return 2 * self.p / (self.p + 1)

    def __call__(self, t):
        return self.eval(t)

    def describe(self) -> dict:
        d = {"kind": self.kind, "p": self.p}
        if self.name:
            d["name"] = self.name
        return d


def power_gauge(p: float) -> DistortionGauge:
    if p <= 0:
        raise ValueError("p must be positive")
    if p == 1:
        return DistortionGauge("power", 1.0, lambda t: np.asarray(t, dtype=float) * 1.0,
                               lambda t: np.ones_like(np.asarray(t, dtype=float)))
    return DistortionGauge("power", float(p), lambda t: np.power(t, p), lambda t: p * np.power(t, p - 1))


def exponential_gauge(p: float) -> DistortionGauge:
    if p <= 0:
        raise ValueError("p must be positive")
    return DistortionGauge("exponential", float(p), lambda t: np.exp(p * np.asarray(t)),
                           lambda t: p * np.exp(p * np.asarray(t)))


def custom_gauge(eval, deriv, p=1.0, name="custom", t_max=50.0, samples=200) -> DistortionGauge:
    """Wrap user functions after checking monotonicity and the derivative."""
    g = DistortionGauge("custom", float(p), eval, deriv, name)
    t = np.geomspace(1.0, t_max, samples)
    a = np.asarray(eval(t), dtype=float)
    if np.any(np.diff(a) < 0) or a[0] < 1:
        raise ValueError("gauge must be nondecreasing with A(1) >= 1")
    h = 1e-5 * t
    fd = (np.asarray(eval(t + h)) - np.asarray(eval(t - h))) / (2 * h)
    d = np.asarray(deriv(t), dtype=float)
    if np.max(np.abs(fd - d) / np.maximum(np.abs(d), 1e-300)) > 1e-6:
        raise ValueError("gauge derivative does not match finite differences")
    return g


def gauge_from_spec(spec) -> DistortionGauge:
    """``{"kind": "power", "p": 2}`` or the string form ``"power:p=2"``."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    kind = spec.get("kind", "power")
    p = float(spec.get("p", 1.0))
    if kind == "power":
        return power_gauge(p)
    if kind in ("exponential", "exp"):
        return exponential_gauge(p)
    raise ValueError(f"unknown gauge kind {kind!r}")


def parse_spec(text: str) -> dict:
    """Parse ``"kind:key=val,key=val"`` into a dict with float values."""
    kind, _, rest = text.partition(":")
    out = {"kind": kind}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


@dataclass
class ConditionFlag:
    holds: bool
    constant: float
    note: str = ""


@dataclass
class GaugeClassification:
    exp_class: ConditionFlag
    power_lower: ConditionFlag
    upper_ratio: ConditionFlag
    lower_ratio: ConditionFlag

    def as_dict(self):
        return {k: vars(getattr(self, k)) for k in ("exp_class", "power_lower", "upper_ratio", "lower_ratio")}


def classify_gauge(gauge: DistortionGauge, t_max: float = 100.0, samples: int = 400) -> GaugeClassification:
    """Check the growth conditions of a gauge on a log-spaced sample of [1, t_max].

    Boundedness is judged by comparing the upper half of the sample (in log
    scale) with the lower half: a quantity that keeps growing or decaying
    there is treated as unbounded.
    """
    if t_max <= 1:
        raise ValueError("t_max must exceed 1")
    t = np.geomspace(1.0, t_max, samples)
    half = t >= np.sqrt(t_max)
    p = gauge.p
    with np.errstate(over="ignore", under="ignore"):
        a = np.asarray(gauge.eval(t), dtype=float)
        da = np.asarray(gauge.deriv(t), dtype=float)
        log_exp_ratio = np.log(a) - p * t
    ratio = t * da / a

    # A(t) >= c0 exp(pt): the log-ratio must not drift downwards
    c_exp = float(np.exp(log_exp_ratio.min()))
    exp_holds = bool(log_exp_ratio[half].min() >= log_exp_ratio[~half].min() - 1e-9)

    # A(t) >= c0 t^p with p > 1
    pow_ratio = a / t**p
    c_pow = float(pow_ratio.min())
    pow_bounded = bool(pow_ratio[half].min() >= pow_ratio[~half].min() * (1 - 1e-9))
    if p > 1:
        power_lower = ConditionFlag(pow_bounded, c_pow)
    elif p == 1 and pow_bounded:
        power_lower = ConditionFlag(False, c_pow, "boundary case p = 1")
    else:
        power_lower = ConditionFlag(False, c_pow, "requires p > 1")

    # t A'(t) <= c1 A(t)
    c1 = float(ratio.max())
    upper_holds = bool(ratio[half].max() <= ratio[~half].max() * (1 + 1e-9))
    # c0 A(t) <= t A'(t)
    c0 = float(ratio.min())
    lower_holds = bool(c0 > 0)
    return GaugeClassification(
        ConditionFlag(exp_holds, c_exp),
        power_lower,
        ConditionFlag(upper_holds, c1, "" if upper_holds else "ratio t A'(t)/A(t) grows without bound"),
        ConditionFlag(lower_holds, c0),
    )


# --- weights --------------------------------------------------------------


@dataclass(frozen=True)
class WeightField:
    """Smooth weight eta >= 1. ``grad`` returns d eta/dx + i d eta/dy."""

    name: str
    eval: Callable = field(compare=False)
    grad: Callable | None = field(default=None, compare=False)
    radial: bool = False

    def __call__(self, z):
        return self.eval(z)

    def gradient(self, z):
        if self.grad is not None:
            return self.grad(z)
        h = 1e-6
        return (self.eval(z + h) - self.eval(z - h)) / (2 * h) + 1j * (
            self.eval(z + 1j * h) - self.eval(z - 1j * h)) / (2 * h)

    @property
    def is_constant(self):
        return self.name == "const"

    def describe(self):
        return {"kind": self.name}


def _const_eval(z):
    return np.ones(np.shape(z))


def _const_grad(z):
    return np.zeros(np.shape(z), dtype=complex)


WEIGHTS: dict[str, WeightField] = {}


def register_weight(weight: WeightField) -> WeightField:
    x = np.linspace(-0.99, 0.99, 41)
    z = (x[:, None] + 1j * x[None, :]).ravel()
    z = z[np.abs(z) < 1]
    if np.any(np.asarray(weight.eval(z)) < 1):
        raise ValueError(f"weight {weight.name!r} drops below 1")
    WEIGHTS[weight.name] = weight
    return weight


register_weight(WeightField("const", _const_eval, _const_grad, radial=True))
register_weight(WeightField("radial", lambda z: 1 + np.abs(z) ** 2, lambda z: 2 * np.asarray(z), radial=True))
register_weight(WeightField(
    "bump",
    lambda z: 1 + 0.5 * np.exp(-4 * np.abs(np.asarray(z) - 0.3) ** 2),
    lambda z: -4 * (np.asarray(z) - 0.3) * np.exp(-4 * np.abs(np.asarray(z) - 0.3) ** 2),
))


def weight_from_spec(spec) -> WeightField:
    if spec is None:
        return WEIGHTS["const"]
    if isinstance(spec, WeightField):
        return spec
    if isinstance(spec, str):
        spec = parse_spec(spec)
    kind = spec.get("kind", "const")
    if kind in ("constant", "const"):
        return WEIGHTS["const"]
    if kind == "expr-id":
        kind = spec["id"]
    try:
        return WEIGHTS[kind]
    except KeyError:
        raise ValueError(f"unregistered weight {kind!r}") from None


CONST = WEIGHTS["const"]


# --- pointwise quantities -------------------------------------------------


def distortion(d: DerivativeSample) -> float:
    if d.jacobian <= 0:
        raise OrientationError(f"distortion undefined: jacobian {d.jacobian} <= 0",
                               [] if d.triangle_id is None else [d.triangle_id])
    a, b = abs(d.f_z) ** 2, abs(d.f_zbar) ** 2
    return (a + b) / (a - b)


def beltrami(d: DerivativeSample) -> complex:
    if d.f_z == 0:
        raise SingularSampleError("f_z = 0: Beltrami coefficient undefined")
    return d.f_zbar / d.f_z


def distortion_array(fz, fzb):
    a, b = np.abs(fz) ** 2, np.abs(fzb) ** 2
    return (a + b) / (a - b)


@dataclass
class EnergyReport:
    value: float
    per_triangle: np.ndarray
    side: str
    gauge: dict
    weight: dict


def _check_orientation(jac, allow_zero=False, scale=None):
    if allow_zero:
        bad = np.flatnonzero(jac < -ZERO_JACOBIAN * scale)
    else:
        bad = np.flatnonzero(jac <= 0)
    if len(bad):
        raise OrientationError(
            f"{len(bad)} inverted or degenerate triangles (first: triangle {bad[0]})", bad)


def energy_f(fmap: TriMeshMap, gauge: DistortionGauge, weight: WeightField = CONST) -> EnergyReport:
    """sum_T A(K_T) eta(centroid_T) area_T."""
    fz, fzb = fmap.derivatives()
    jac = np.abs(fz) ** 2 - np.abs(fzb) ** 2
    _check_orientation(jac)
    mesh = fmap.mesh
    per = np.asarray(gauge.eval(distortion_array(fz, fzb)), dtype=float) * weight.eval(mesh.centroids) * mesh.areas
    return EnergyReport(float(np.sum(per)), per, "f_side", gauge.describe(), weight.describe())


def energy_h(hmap: TriMeshMap, gauge: DistortionGauge, weight: WeightField = CONST) -> EnergyReport:
    """sum_T A(K_T) J_T eta(h(centroid_T)) area_T; collapsed triangles give 0."""
    fz, fzb = hmap.derivatives()
    a, b = np.abs(fz) ** 2, np.abs(fzb) ** 2
    jac = a - b
    _check_orientation(jac, allow_zero=True, scale=a + b)
    live = jac > ZERO_JACOBIAN * (a + b)
    per = np.zeros(len(jac))
    k = (a[live] + b[live]) / jac[live]
    hc = hmap.image[hmap.mesh.triangles].mean(axis=1)
    per[live] = np.asarray(gauge.eval(k)) * jac[live] * weight.eval(hc[live]) * hmap.mesh.areas[live]
    return EnergyReport(float(np.sum(per)), per, "h_side", gauge.describe(), weight.describe())


# --- energy with gradient, for the optimizer ------------------------------


def energy_and_gradient(mesh: TriMesh, image, gauge: DistortionGauge, weight: WeightField, side: str,
                        need_grad: bool = True):
    """Discrete energy of the map ``image`` and its gradient.

    The gradient is returned as dE/dx + i dE/dy per vertex. Returns
    ``(inf, None)`` when some triangle is inverted (or, on the f side,
    degenerate).
    """
    gz, gzb = mesh.wirtinger_operators()
    tri = mesh.triangles
    w = image[tri]
    fz = apply_operator(gz, w)
    fzb = apply_operator(gzb, w)
    a = fz.real**2 + fz.imag**2
    b = fzb.real**2 + fzb.imag**2
    jac = a - b
    area = mesh.areas
    if side == "f_side":
        if np.any(jac <= 0):
            return np.inf, None
        k = (a + b) / jac
        eta = weight.eval(mesh.centroids)
        A = np.asarray(gauge.eval(k), dtype=float)
        energy = float(np.sum(A * eta * area))
        if not need_grad:
            return energy, None
        dA = np.asarray(gauge.deriv(k), dtype=float) * eta * area
        de_da = dA * (-2 * b / jac**2)
        de_db = dA * (2 * a / jac**2)
        g_eta = None
    elif side == "h_side":
        if np.any(jac <= 0):
            return np.inf, None
        k = (a + b) / jac
        hc = w.mean(axis=1)
        eta = weight.eval(hc)
        A = np.asarray(gauge.eval(k), dtype=float)
        base = A * jac * area
        energy = float(np.sum(base * eta))
        if not need_grad:
            return energy, None
        dA = np.asarray(gauge.deriv(k), dtype=float)
        de_da = eta * area * (A - dA * 2 * b / jac)
        de_db = eta * area * (dA * 2 * a / jac - A)
        g_eta = None if weight.is_constant else base * weight.gradient(hc) / 3.0
    else:
        raise ValueError(f"unknown side {side!r}")
    # dE/dx + i dE/dy = 2 dE/d conj(w)
    contrib = 2 * (de_da * fz)[:, None] * np.conj(gz) + 2 * (de_db * fzb)[:, None] * np.conj(gzb)
    if g_eta is not None:
        contrib = contrib + g_eta[:, None]
    n = mesh.n_vertices
    grad = (np.bincount(tri.ravel(), contrib.real.ravel(), minlength=n)
            + 1j * np.bincount(tri.ravel(), contrib.imag.ravel(), minlength=n))
    return energy, grad
