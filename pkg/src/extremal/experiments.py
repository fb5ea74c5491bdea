"""Experiment configuration, end-to-end runs and refinement studies."""

from __future__ import annotations

import shutil
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .boundary import InfeasibleInputError, boundary_from_spec, poisson_extension
from .energy import energy_f, gauge_from_spec, parse_spec, weight_from_spec
from .fuchsian import group_from_spec, transfer_identity_check
from .hairs import default_probes, detect_hairs, tip_measure
from .hopf import hopf_field, inner_variation_residual, reich_strebel_check
from .io import ArtifactIOError, csv_meta, load_json, provenance, save_csv, save_json
from .lobes import BoundaryPair, decompose_lobes, total_varg
from .mesh import OrientationError, PointLocationError, TriMesh, TriMeshMap, build_disk_mesh, map_to_dict
from .solver import SolveOptions, minimize_energy, pseudo_inverse

DEFAULT_SEED = 0x5EED


class ExperimentError(RuntimeError):
    """A module failed during an experiment; ``code`` names the module and kind."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


@dataclass
class ExperimentConfig:
    gauge: str | dict = "power:p=2"
    weight: str | dict = "const"
    boundary: str | dict = "sin:a=0.3"
    n_boundary: int = 16
    refinement: int = 3
    side: str = "f"
    solver: dict = field(default_factory=dict)
    evaluate: str | None = None  # closed-form map to evaluate instead of solving
    hopf: bool = True
    lobes: bool = False
    hairs: bool = False
    fuchsian: bool = False
    group: str | dict = "octagon"
    cutoff: int = 3
    lobe_samples: int = 4096
    out_dir: str | None = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.side not in ("f", "h"):
            raise InfeasibleInputError("side must be 'f' or 'h'")
        if self.n_boundary < 8 or self.refinement < 0:
            raise InfeasibleInputError("mesh needs n_boundary >= 8 and refinement >= 0")
        gauge_from_spec(self.gauge)
        weight_from_spec(self.weight)
        boundary_from_spec(self.boundary)
        SolveOptions(**self.solver)
        if self.fuchsian:
            group_from_spec(self.group)
        if self.evaluate is not None:
            evaluate_map(self.evaluate, build_disk_mesh(8, 0))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InfeasibleInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_json(path))

    def to_dict(self) -> dict:
        return asdict(self)

    def hash_view(self) -> dict:
        """Fields that determine results (output location excluded)."""
        d = self.to_dict()
        d.pop("out_dir")
        return d

    def mesh(self) -> TriMesh:
        return build_disk_mesh(self.n_boundary, self.refinement)


def evaluate_map(spec: str, mesh: TriMesh) -> TriMeshMap:
    """Closed-form test maps: ``radial:s=2`` (z |z|^(s-1)), ``id``, ``mobius:a=0.3``, ``affine:k=0.25``."""
    d = parse_spec(spec) if isinstance(spec, str) else dict(spec)
    kind = d["kind"]
    z = mesh.vertices
    if kind == "radial":
        s = float(d.get("s", 2.0))
        return TriMeshMap(mesh, z * np.abs(z) ** (s - 1))
    if kind in ("id", "identity"):
        return TriMeshMap(mesh, z.copy())
    if kind == "mobius":
        a = float(d.get("a", 0.3))
        return TriMeshMap(mesh, (z - a) / (1 - a * z))
    if kind == "affine":
        k = float(d.get("k", 0.25))
        return TriMeshMap(mesh, z + k * np.conj(z))
    raise InfeasibleInputError(f"unknown map kind {kind!r}")


def reference_energy(config: ExperimentConfig) -> float | None:
    """Closed-form energy where one is known (constant weight, power gauge)."""
    g = gauge_from_spec(config.gauge)
    w = weight_from_spec(config.weight)
    if g.kind != "power" or w.name not in ("const", "constant"):
        return None
    if config.evaluate is not None:
        d = parse_spec(config.evaluate) if isinstance(config.evaluate, str) else dict(config.evaluate)
        if d["kind"] == "radial":
            s = float(d.get("s", 2.0))
            return float(np.pi * ((s * s + 1) / (2 * s)) ** g.p)
        if d["kind"] in ("id", "identity", "mobius"):
            return float(np.pi)
        return None
    bd = boundary_from_spec(config.boundary)
    if bd.spec.get("kind") in ("id", "identity", "rot", "mobius"):
        return float(np.pi)
    return None


@dataclass
class ExperimentBundle:
    result: dict
    summary: dict
    files: list
    out_dir: Path | None = None
    maps: dict = field(default_factory=dict, repr=False)


def _wrap(code):
    def deco(fn):
        def inner(*a, **k):
            try:
                return fn(*a, **k)
            except ExperimentError:
                raise
            except InfeasibleInputError as exc:
                raise ExperimentError(f"{code}.infeasible", str(exc)) from exc
            except (OrientationError, PointLocationError) as exc:
                raise ExperimentError(f"{code}.geometry", str(exc)) from exc
            except ArtifactIOError as exc:
                raise ExperimentError(f"{code}.io", str(exc)) from exc
        return inner
    return deco


@_wrap("solver")
def _solve(config: ExperimentConfig, mesh: TriMesh):
    gauge = gauge_from_spec(config.gauge)
    weight = weight_from_spec(config.weight)
    bd = boundary_from_spec(config.boundary)
    opts = SolveOptions(**config.solver)
    if config.evaluate is not None:
        f = evaluate_map(config.evaluate, mesh)
        return f, pseudo_inverse(f).map, None, energy_f(f, gauge, weight).value
    if config.side == "f":
        f, rep = minimize_energy(mesh, bd, gauge, weight, "f_side", opts)
        h = pseudo_inverse(f).map
    else:
        h, rep = minimize_energy(mesh, bd.inverse(), gauge, weight, "h_side", opts)
        f = pseudo_inverse(h).map
    return f, h, rep, rep.final_energy


def harmonic_oracle_error(h: TriMeshMap, boundary) -> float:
    """Largest vertex gap between ``h`` and the Poisson extension of the inverse boundary map."""
    inv = boundary_from_spec(boundary).inverse()
    ref = poisson_extension(inv, h.mesh.vertices)
    return float(np.max(np.abs(h.image - ref)))


@_wrap("hopf")
def _hopf(config, h):
    gauge = gauge_from_spec(config.gauge)
    weight = weight_from_spec(config.weight)
    field_ = hopf_field(h, gauge, weight)
    res = inner_variation_residual(h, gauge, weight, side="h_side_p")
    lhs, rhs = reich_strebel_check(field_, TriMeshMap(h.mesh, h.mesh.vertices.copy()))
    doc = {"l1_norm": field_.l1_norm, "dbar_l1": field_.dbar_l1, "residuals": res, "lhs": lhs, "rhs": rhs}
    c = h.mesh.centroids
    rows = [(i, c[i].real, c[i].imag, abs(field_.phi[i])) for i in range(len(c))]
    return doc, rows


@_wrap("lobes")
def _lobes(config):
    pair = BoundaryPair.from_maps(config.boundary, "id", config.lobe_samples)
    dec = decompose_lobes(pair)
    doc = dec.as_dict()
    doc["total_varg"] = total_varg(dec)
    rows = []
    for k, lb in enumerate(dec.lobes):
        rows += [(k, t, g.real, g.imag) for t, g in zip(lb.theta, lb.curve)]
    return doc, rows


@_wrap("hairs")
def _hairs(config, h):
    rep = detect_hairs(h)
    tip_measure(rep, h, default_probes())
    rows = []
    for k, hair in enumerate(rep.hairs):
        z = h.mesh.vertices[hair.fiber_vertices]
        rows += [(k, int(v), p.real, p.imag) for v, p in zip(hair.fiber_vertices, z)]
    return rep.as_dict(), rows


@_wrap("fuchsian")
def _fuchsian(config):
    group = group_from_spec(config.group)
    dom = group.fundamental_domain()
    ident = TriMeshMap(dom.mesh, dom.mesh.vertices.copy())
    tr = transfer_identity_check(ident, 1.0, group, config.cutoff)
    return {"group": group.parameters, "cutoff": config.cutoff, "hyperbolic_area": dom.hyperbolic_area(),
            "transfer": tr.as_dict()}


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentBundle:
    """Solve, invert and analyse; write ``result.json``, analysis files and ``summary.csv``.

    Files are written to a scratch directory and moved into place only when
    every step succeeded, so a failure leaves no partial bundle.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    out_dir = out_dir if out_dir is not None else config.out_dir
    prov = provenance(config.hash_view(), config.seed)
    meta = csv_meta(prov)
    mesh = config.mesh()
    f, h, rep, energy = _solve(config, mesh)

    result = {"provenance": prov, "config": config.hash_view(), "side": config.side,
              "report": rep.as_dict() if rep is not None else None, "energy": energy,
              "map": map_to_dict(f), "inverse": map_to_dict(h)}
    summary = {"config_hash": prov["config_hash"], "seed": config.seed, "refinement": config.refinement,
               "n_triangles": mesh.n_triangles, "energy": energy,
               "status": rep.status if rep else "evaluated",
               "iterations": rep.iterations if rep else 0,
               "gradient_norm": rep.gradient_norm if rep else float("nan"),
               "min_jacobian": float(f.jacobians().min()),
               "roundtrip_error": rep.roundtrip_error if rep else pseudo_inverse(f).roundtrip_error}
    ref = reference_energy(config)
    summary["reference_energy"] = ref if ref is not None else float("nan")
    if config.evaluate is None:
        summary["oracle_error"] = harmonic_oracle_error(h, config.boundary)
    files = {}
    if config.hopf:
        doc, rows = _hopf(config, h)
        files["hopf.json"] = {"provenance": prov, **doc}
        files["hopf_phi.csv"] = (("triangle", "x", "y", "abs_phi"), rows)
        summary.update(dbar_l1=doc["dbar_l1"], l1_norm=doc["l1_norm"], max_residual=max(doc["residuals"]))
    if config.lobes:
        doc, rows = _lobes(config)
        files["lobes.json"] = {"provenance": prov, **doc}
        files["lobe_curves.csv"] = (("lobe", "theta", "re", "im"), rows)
        summary.update(n_lobes=len(doc["lobes"]), total_varg=doc["total_varg"])
    if config.hairs:
        doc, rows = _hairs(config, h)
        files["hairs.json"] = {"provenance": prov, **doc}
        files["hair_fibers.csv"] = (("hair", "vertex", "x", "y"), rows)
        summary.update(n_hairs=len(doc["hairs"]), tip_measure=doc["Z_estimate"])
    if config.fuchsian:
        doc = _fuchsian(config)
        files["fuchsian.json"] = {"provenance": prov, **doc}
        summary.update(transfer_lhs=doc["transfer"]["lhs"], transfer_rhs=doc["transfer"]["rhs"])

    bundle = ExperimentBundle(result, summary, [], None, {"f": f, "h": h})
    if out_dir is None:
        return bundle
    out_dir = Path(out_dir)
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=".partial-"))
    except OSError as exc:
        raise ExperimentError("experiments.io", str(exc)) from exc
    try:
        save_json(scratch / "result.json", result)
        for name, payload in files.items():
            if name.endswith(".csv"):
                save_csv(scratch / name, payload[0], payload[1], meta)
            else:
                save_json(scratch / name, payload)
        save_csv(scratch / "summary.csv", list(summary), [list(summary.values())], meta)
        out_dir.mkdir(exist_ok=True)
        names = ["result.json", *files, "summary.csv"]
        for name in names:
            (scratch / name).replace(out_dir / name)
    except OSError as exc:
        raise ExperimentError("experiments.io", str(exc)) from exc
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    bundle.files = [out_dir / n for n in names]
    bundle.out_dir = out_dir
    return bundle


# --- refinement studies ---------------------------------------------------


def fitted_order(h, err, floor: float = 1e-13):
    """Least-squares slope of log(err) against log(h); ``None`` when saturated."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = np.isfinite(err) & (err > floor)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(h[ok]), np.log(err[ok]), 1)[0])


@dataclass
class StudyTable:
    rows: list
    orders: dict
    saturated: dict

    def as_dict(self):
        return {"rows": self.rows, "orders": self.orders, "saturated": self.saturated}


def convergence_study(config: ExperimentConfig, refinements) -> StudyTable:
    """Run the experiment at several refinements and fit error orders.

    Columns: mesh size ``h`` (mean edge length), energy, its error (against
    the closed form when known, else against the finest level), ``dbar_l1``
    and the harmonic-oracle error. A column whose errors all sit at rounding
    level is reported as saturated instead of fitted.
    """
    refinements = sorted(set(int(r) for r in refinements))
    if len(refinements) < 3:
        raise InfeasibleInputError("a convergence study needs at least three refinement levels")
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    rows = []
    for r in refinements:
        cfg = ExperimentConfig.from_dict({**config.to_dict(), "refinement": r, "lobes": False, "hairs": False,
                                          "fuchsian": False, "out_dir": None})
        b = run_experiment(cfg, out_dir=None)
        mesh = b.maps["f"].mesh
        e = mesh.edges
        hsize = float(np.mean(np.abs(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]])))
        rows.append({"refinement": r, "h": hsize, "energy": b.summary["energy"],
                     "dbar_l1": b.summary.get("dbar_l1", float("nan")),
                     "oracle_error": b.summary.get("oracle_error", float("nan"))})
    ref = reference_energy(config)
    if ref is None:
        ref = rows[-1]["energy"]
        for row in rows:
            row["energy_error"] = abs(row["energy"] - ref) if row is not rows[-1] else float("nan")
    else:
        for row in rows:
            row["energy_error"] = abs(row["energy"] - ref)
    hs = [row["h"] for row in rows]
    orders, saturated = {}, {}
    for col in ("energy_error", "dbar_l1", "oracle_error"):
        vals = np.array([row[col] for row in rows], dtype=float)
        finite = vals[np.isfinite(vals)]
        saturated[col] = bool(len(finite) and np.all(finite <= 1e-13))
        orders[col] = fitted_order(hs, vals)
    return StudyTable(rows, orders, saturated)
