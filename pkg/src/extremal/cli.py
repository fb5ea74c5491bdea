"""Command-line entry point: ``extremal [global flags] <command> [options]``.

Exit codes: 0 ok, 2 nonconvergence, 3 infeasible input, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .boundary import InfeasibleInputError
from .energy import gauge_from_spec, weight_from_spec
from .experiments import DEFAULT_SEED, ExperimentConfig, ExperimentError, convergence_study, run_experiment
from .fuchsian import (
    DomainError,
    PoincareWeight,
    automorphic_phi_l1_growth,
    automorphy_error,
    group_from_spec,
    poincare_weight,
    transfer_identity_check,
)
from .hairs import default_probes, detect_hairs, tip_measure
from .hopf import default_tests, hopf_field, inner_variation_residual, reich_strebel_check
from .io import ArtifactIOError, csv_meta, load_json, provenance, save_csv, save_json
from .lobes import BoundaryPair, LobeInvariantError, decompose_lobes, random_monotone_pair, total_varg
from .mesh import OrientationError, PointLocationError, TriMeshMap, map_from_dict

EXIT_OK, EXIT_NONCONVERGED, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("extremal")


def _problem_flags(p):
    p.add_argument("--gauge", help="e.g. power:p=2 or exponential:p=1")
    p.add_argument("--weight", help="const, radial, bump or expr-id:id=NAME")
    p.add_argument("--boundary", help="e.g. sin:a=0.3, mobius:a=0.3, id")
    p.add_argument("--refine", type=int, dest="refinement")
    p.add_argument("--n-boundary", type=int, dest="n_boundary")
    p.add_argument("--side", choices=("f", "h"))
    p.add_argument("--evaluate", help="evaluate a closed-form map (radial:s=2) instead of solving")
    p.add_argument("--gtol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extremal", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="experiment config (JSON)")
    ap.add_argument("--out", type=Path, dest="out_dir", help="directory for outputs")
    ap.add_argument("--seed", type=lambda s: int(s, 0), default=None, help=f"PRNG seed (default {DEFAULT_SEED:#x})")
    ap.add_argument("--threads", type=int, default=None, help="cap BLAS/LAPACK threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="minimize the energy and write result.json")
    _problem_flags(p)
    p.add_argument("--out", default="result.json")

    p = sub.add_parser("run", help="full experiment bundle (solve + analyses) from --config")
    p.add_argument("--out", default="bundle")

    p = sub.add_parser("hopf-check", help="Hopf differential, inner variations, Reich-Strebel")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tests", default="default", choices=("default",))
    p.add_argument("--out", default="hopf.json")

    p = sub.add_parser("lobes", help="lobe decomposition of two boundary maps")
    p.add_argument("--alpha", default="sin:a=0.4")
    p.add_argument("--beta", default="id")
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--random", type=int, default=0, help="also check N seeded random pairs")
    p.add_argument("--out", default="lobes.json")

    p = sub.add_parser("hairs", help="detect hairs of a computed map")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", default="auto")
    p.add_argument("--probes", type=int, default=8)
    p.add_argument("--out", default="hairs.json")

    p = sub.add_parser("fuchsian", help="Poincare weights and transfer identities")
    p.add_argument("--group", default="octagon", help="trivial, cyclic, octagon or a JSON object/file")
    p.add_argument("--cutoff", type=int, default=4)
    p.add_argument("--check", default="transfer", choices=("transfer", "weight", "automorphy", "area", "growth", "all"))
    p.add_argument("--out", default="fuchsian.json")

    p = sub.add_parser("study", help="refinement study with fitted orders")
    _problem_flags(p)
    p.add_argument("--refinements", default="2,3,4,5")
    p.add_argument("--out", default="study.json")
    return ap


def _target(args, name) -> Path:
    out = Path(name)
    if args.out_dir is not None and not out.is_absolute():
        out = args.out_dir / out
    return out


def _config(args) -> ExperimentConfig:
    doc = load_json(args.config) if args.config else {}
    for key in ("gauge", "weight", "boundary", "refinement", "n_boundary", "side", "evaluate"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    solver = dict(doc.get("solver", {}))
    for key in ("gtol", "max_iter"):
        val = getattr(args, key, None)
        if val is not None:
            solver[key] = val
    doc["solver"] = solver
    if args.seed is not None:
        doc["seed"] = args.seed
    return ExperimentConfig.from_dict(doc)


def _seed(args, doc=None) -> int:
    if args.seed is not None:
        return args.seed
    return int((doc or {}).get("seed", DEFAULT_SEED))


def cmd_solve(args) -> int:
    cfg = _config(args)
    cfg.hopf = False
    bundle = run_experiment(cfg, out_dir=None)
    save_json(_target(args, args.out), bundle.result)
    status = bundle.summary["status"]
    print(json.dumps({k: bundle.summary[k] for k in ("energy", "status", "iterations", "min_jacobian")}))
    return EXIT_OK if status in ("converged", "evaluated") else EXIT_NONCONVERGED


def cmd_run(args) -> int:
    if args.config is None:
        raise InfeasibleInputError("run needs --config")
    cfg = _config(args)
    bundle = run_experiment(cfg, out_dir=_target(args, args.out))
    for f in bundle.files:
        print(f)
    return EXIT_OK if bundle.summary["status"] in ("converged", "evaluated") else EXIT_NONCONVERGED


def _load_result(path):
    doc = load_json(path)
    try:
        h = map_from_dict(doc["inverse"])
        cfg = doc["config"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactIOError(f"{path} is not a result file: {exc}") from exc
    return doc, h, cfg


def cmd_hopf(args) -> int:
    doc, h, cfg = _load_result(args.infile)
    gauge, weight = gauge_from_spec(cfg["gauge"]), weight_from_spec(cfg["weight"])
    field_ = hopf_field(h, gauge, weight)
    res = inner_variation_residual(h, gauge, weight, default_tests(), side="h_side_p")
    lhs, rhs = reich_strebel_check(field_, TriMeshMap(h.mesh, h.mesh.vertices.copy()))
    prov = doc.get("provenance") or provenance(cfg, _seed(args, cfg))
    out = _target(args, args.out)
    save_json(out, {"provenance": prov, "l1_norm": field_.l1_norm, "dbar_l1": field_.dbar_l1,
                    "residuals": res, "lhs": lhs, "rhs": rhs})
    c = h.mesh.centroids
    save_csv(out.with_suffix(".csv"), ("triangle", "x", "y", "abs_phi"),
             [(i, c[i].real, c[i].imag, abs(field_.phi[i])) for i in range(len(c))], csv_meta(prov))
    print(json.dumps({"dbar_l1": field_.dbar_l1, "l1_norm": field_.l1_norm, "max_residual": max(res)}))
    return EXIT_OK


def cmd_lobes(args) -> int:
    seed = _seed(args)
    cfg = {"alpha": args.alpha, "beta": args.beta, "n": args.n, "tol": args.tol, "random": args.random}
    prov = provenance(cfg, seed)
    dec = decompose_lobes(BoundaryPair.from_maps(args.alpha, args.beta, args.n), args.tol)
    doc = {"provenance": prov, **dec.as_dict(), "total_varg": total_varg(dec)}
    if args.random:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for k in range(args.random):
            d = decompose_lobes(random_monotone_pair(rng, args.n, arc=1.0 if k % 3 == 0 else 0.0), args.tol)
            worst = max(worst, abs(total_varg(d) - (2 * np.pi - d.X_measure)))
        doc["random_pairs"] = {"count": args.random, "max_identity_gap": worst}
    out = _target(args, args.out)
    save_json(out, doc)
    rows = [(k, t, g.real, g.imag) for k, lb in enumerate(dec.lobes) for t, g in zip(lb.theta, lb.curve)]
    save_csv(out.with_suffix(".csv"), ("lobe", "theta", "re", "im"), rows, csv_meta(prov))
    print(json.dumps({"n_lobes": len(dec.lobes), "total_varg": doc["total_varg"], "X_measure": dec.X_measure}))
    return EXIT_OK


def cmd_hairs(args) -> int:
    doc, h, cfg = _load_result(args.infile)
    tol = None if args.tol == "auto" else float(args.tol)
    rep = detect_hairs(h, tol)
    tip_measure(rep, h, default_probes(args.probes))
    prov = doc.get("provenance") or provenance(cfg, _seed(args, cfg))
    out = _target(args, args.out)
    save_json(out, {"provenance": prov, **rep.as_dict()})
    rows = []
    for k, hair in enumerate(rep.hairs):
        z = h.mesh.vertices[hair.fiber_vertices]
        rows += [(k, int(v), p.real, p.imag) for v, p in zip(hair.fiber_vertices, z)]
    save_csv(out.with_suffix(".csv"), ("hair", "vertex", "x", "y"), rows, csv_meta(prov))
    print(json.dumps({"n_hairs": len(rep), "tip_measure": rep.Z_estimate}))
    return EXIT_OK


def _group_spec(text):
    if text.strip().startswith("{"):
        return json.loads(text)
    if text.endswith(".json"):
        return load_json(text)
    return text


def cmd_fuchsian(args) -> int:
    spec = _group_spec(args.group)
    group = group_from_spec(spec)
    cfg = {"group": group.parameters, "cutoff": args.cutoff, "check": args.check}
    out_doc = {"provenance": provenance(cfg, _seed(args)), "group": group.parameters, "cutoff": args.cutoff}
    checks = ("area", "weight", "automorphy", "transfer", "growth") if args.check == "all" else (args.check,)
    for check in checks:
        if check == "weight":
            wv = poincare_weight(0.0, group, args.cutoff)
            out_doc["weight_at_0"] = {"value": float(wv.value), "tail_estimate": float(wv.tail_estimate)}
        elif check == "automorphy":
            z = 0.5 * np.sqrt(np.linspace(0, 1, 9)) * np.exp(2.4j * np.arange(9))
            out_doc["automorphy_error"] = automorphy_error(PoincareWeight(group, args.cutoff), z, group.generators)
        elif check == "area":
            out_doc["hyperbolic_area"] = group.fundamental_domain().hyperbolic_area()
        elif check == "transfer":
            dom = group.fundamental_domain()
            tr = transfer_identity_check(TriMeshMap(dom.mesh, dom.mesh.vertices.copy()), 1.0, group, args.cutoff)
            out_doc["transfer"] = tr.as_dict()
        elif check == "growth":
            dom = group.fundamental_domain()
            sums, counts = automorphic_phi_l1_growth(np.ones(dom.mesh.n_triangles), group, args.cutoff, dom)
            out_doc["growth"] = {"partial_sums": sums.tolist(), "counts": counts.tolist()}
    save_json(_target(args, args.out), out_doc)
    print(json.dumps({k: v for k, v in out_doc.items() if k != "provenance"}, default=str))
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _config(args)
    refs = [int(r) for r in args.refinements.split(",") if r.strip()]
    table = convergence_study(cfg, refs)
    prov = provenance(cfg.hash_view(), cfg.seed)
    out = _target(args, args.out)
    save_json(out, {"provenance": prov, **table.as_dict()})
    cols = ["refinement", "h", "energy", "energy_error", "dbar_l1", "oracle_error"]
    save_csv(out.with_suffix(".csv"), cols, [[row[c] for c in cols] for row in table.rows], csv_meta(prov))
    print(json.dumps({"orders": table.orders, "saturated": table.saturated}))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "run": cmd_run, "hopf-check": cmd_hopf, "lobes": cmd_lobes, "hairs": cmd_hairs,
            "fuchsian": cmd_fuchsian, "study": cmd_study}


def _threads(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        with _threads(args.threads):
            return COMMANDS[args.command](args)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if exc.code.endswith(".io") else EXIT_INFEASIBLE
    except (ArtifactIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InfeasibleInputError, OrientationError, PointLocationError, DomainError, LobeInvariantError,
            ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
