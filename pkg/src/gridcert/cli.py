"""Command-line front end.

Subcommands: pf, certify, certify-r, screen, index, gain, boundary,
coalescence, bench. Every artifact embeds the invoking configuration and
seed. Exit codes: 0 = success (certificate passed / power flow converged),
2 = computed but the answer is "no", 1 = failure to compute.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts, boundary, cert, pf, screen
from .linalg import BlockStructureError, SingularMatrixError
from .netmodel import CaseError, ParseError, build_network, load_case

_ENV_THREADS = "GRIDCERT_THREADS"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(_ENV_THREADS, "1")))
    except ValueError:
        return 1


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _model(args):
    return build_network(load_case(args.case),
                         include_line_charging=args.line_charging)


def _meta(args, **extra) -> dict:
    doc = {"command": args.cmd, "case": getattr(args, "case", None)}
    for key in ("scale", "powerfactor", "injection", "radius", "points",
                "range", "buses", "mode", "rays", "bus", "reps", "seed",
                "threads", "tol_rel"):
        if hasattr(args, key):
            doc[key] = getattr(args, key)
    doc.update(extra)
    return doc


def _target_injection(args, model) -> np.ndarray:
    if args.injection is not None:
        return artifacts.load_injection_map(Path(args.injection).read_text(),
                                            model)
    if args.scale is not None:
        du = boundary.homogeneous_direction(model, args.powerfactor)
        return model.s_base + args.scale * du
    return model.s_base.copy()


def _add_injection_opts(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--injection", metavar="FILE",
                   help="JSON injection map {bus_id: {P, Q}} in p.u. "
                        "(net injection, consumption negative)")
    g.add_argument("--scale", type=float, default=None, metavar="LAMBDA",
                   help="load the base case homogeneously by LAMBDA at the "
                        "--pf power factor")
    p.add_argument("--pf", dest="powerfactor", type=float, default=0.9,
                   help="power factor for --scale (default 0.9)")


def _add_common(p):
    p.add_argument("case", help="case file (.m MATPOWER subset or .json mirror)")
    p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    p.add_argument("--line-charging", action="store_true",
                   help="include branch charging susceptance")


def cmd_pf(args) -> int:
    model = _model(args)
    s = _target_injection(args, model)
    sol = pf.newton_pf(model, s, tol=args.tol, max_iter=args.max_iter,
                       raise_on_fail=False)
    doc = {
        "config": _meta(args),
        "converged": sol.converged,
        "iterations": sol.iterations,
        "final_mismatch": sol.final_mismatch,
        "bus_ids": list(model.bus_ids),
        "Vm": np.abs(sol.V).tolist(),
        "Va_deg": np.rad2deg(np.angle(sol.V)).tolist(),
    }
    _write(artifacts.dump_json(doc), args.output)
    return 0 if sol.converged else 2


def cmd_certify(args) -> int:
    model = _model(args)
    base = cert.base_point(model, model.s_base)
    s = _target_injection(args, model)
    if getattr(args, "radius", None) is not None:
        report = cert.certify_r(base, s, args.radius)
    else:
        report = cert.certify(base, s)
    _write(artifacts.dump_json(
        artifacts.certificate_report_doc(report, _meta(args))), args.output)
    return 0 if report.passed else 2


def cmd_screen(args) -> int:
    model = _model(args)
    spec = screen.SamplingSpec(
        n_points=args.points, range_frac=args.range / 100.0,
        bus_indices=_bus_indices(args, model),
    )
    cloud = screen.sample_injections(model, spec, args.seed)
    if args.mode == "fast":
        result = screen.fast_screen(model, cloud, threads=args.threads)
    else:
        result = screen.brute_screen(model, cloud)
    if args.format == "csv":
        _write(artifacts.screen_result_csv(result, cloud, model), args.output)
    else:
        _write(artifacts.dump_json(
            artifacts.screen_result_doc(result, cloud, _meta(args))), args.output)
    return 0


def cmd_index(args) -> int:
    model = _model(args)
    base = cert.base_point(model, model.s_base)
    spec = screen.SamplingSpec(
        n_points=args.points, range_frac=args.range / 100.0,
        bus_indices=_bus_indices(args, model),
    )
    cloud = screen.sample_injections(model, spec, args.seed)
    idx = screen.solvability_index(base, cloud)
    _write(artifacts.dump_json({"config": _meta(args), "seed": cloud.seed,
                                "index": idx}), args.output)
    return 0


def cmd_gain(args) -> int:
    model = _model(args)
    base = cert.base_point(model, model.s_base)
    direction = (boundary.homogeneous_direction(model, args.powerfactor)
                 if args.direction else None)
    report = cert.certified_admissible_gain(
        base, direction=direction, tol_rel=args.tol_rel,
        true_limit=args.true_limit)
    _write(artifacts.dump_json(
        artifacts.gain_report_doc(report, _meta(args))), args.output)
    return 0


def cmd_boundary(args) -> int:
    model = _model(args)
    base = cert.base_point(model, model.s_base)
    plane = (boundary.single_bus_plane(model, args.bus)
             if args.bus is not None else boundary.homogeneous_plane(model))
    trace = boundary.trace_boundary_2d(base, plane, n_rays=args.rays,
                                       r=args.radius, tol_rel=args.tol_rel,
                                       with_true=args.true)
    if args.format == "json":
        _write(artifacts.dump_json(
            artifacts.boundary_trace_doc(trace, _meta(args))), args.output)
    else:
        _write(artifacts.boundary_trace_csv(trace), args.output)
    return 0


def cmd_coalescence(args) -> int:
    model = _model(args)
    base = cert.base_point(model, model.s_base)
    if args.pf_list:
        grid = [float(tok) for tok in args.pf_list.split(",") if tok.strip()]
    else:
        lo, hi, count = args.grid
        grid = np.linspace(lo, hi, int(count)).tolist()
    scan = boundary.coalescence_scan(base, grid, tol_rel=args.tol_rel)
    _write(artifacts.dump_json(
        artifacts.coalescence_doc(scan, _meta(args))), args.output)
    return 0


def cmd_bench(args) -> int:
    models = [build_network(load_case(p)) for p in args.cases]
    result = boundary.runtime_scaling(models, repetitions=args.reps)
    meta = {"command": args.cmd, "cases": list(args.cases), "reps": args.reps}
    _write(artifacts.dump_json(artifacts.scaling_doc(result, meta)),
           args.output)
    return 0


def _bus_indices(args, model):
    if not args.buses:
        return None
    return tuple(model.index_of(int(tok))
                 for tok in args.buses.split(",") if tok.strip())


def _grid_triplet(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start:stop:count")
    return float(parts[0]), float(parts[1]), float(parts[2])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridcert",
        description="Fixed-point solvability certificates for distribution "
                    "feeders: certify injections, screen injection clouds, "
                    "trace solvability boundaries and compute certified "
                    "loading gains.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("pf", help="solve the power flow for one injection")
    _add_common(p)
    _add_injection_opts(p)
    p.add_argument("--tol", type=float, default=pf.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=pf.DEFAULT_MAX_ITER)
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("certify",
                       help="radius-free certificate for one injection")
    _add_common(p)
    _add_injection_opts(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("certify-r",
                       help="radius-r certificate with voltage envelope")
    _add_common(p)
    _add_injection_opts(p)
    p.add_argument("--radius", type=float, required=True,
                   help="envelope radius r > 0 (envelope reported for r < 1)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("screen", help="classify a sampled injection cloud")
    _add_common(p)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--range", type=float, default=500.0,
                   help="sampling range, percent of base (default 500)")
    p.add_argument("--buses", default="",
                   help="comma-separated bus ids to vary (default all)")
    p.add_argument("--mode", choices=("fast", "brute"), default="fast")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("index",
                       help="effective solvability index of a sampled cloud")
    _add_common(p)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--range", type=float, default=500.0)
    p.add_argument("--buses", default="")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("gain", help="certified admissible gain report")
    _add_common(p)
    p.add_argument("--direction", action="store_true",
                   help="also compute the per-direction gain along the "
                        "homogeneous --pf direction")
    p.add_argument("--pf", dest="powerfactor", type=float, default=0.9)
    p.add_argument("--true-limit", action="store_true",
                   help="also compute the true loadability (slow)")
    p.add_argument("--tol-rel", type=float, default=1e-6)
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("boundary", help="trace a 2-D solvability boundary")
    _add_common(p)
    p.add_argument("--rays", type=int, default=180)
    p.add_argument("--radius", type=float, default=None,
                   help="fixed envelope radius (default: radius-free form)")
    p.add_argument("--true", action="store_true",
                   help="also trace the true boundary (slow)")
    p.add_argument("--bus", type=int, default=None,
                   help="single-bus P-Q slice instead of the homogeneous one")
    p.add_argument("--tol-rel", type=float, default=1e-6)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("coalescence",
                       help="covering-ratio scan over power factors")
    _add_common(p)
    p.add_argument("--grid", type=_grid_triplet, default=(0.5, 0.999, 11),
                   help="power-factor grid start:stop:count")
    p.add_argument("--pf-list", default="",
                   help="explicit comma-separated power factors")
    p.add_argument("--tol-rel", type=float, default=1e-4)
    p.set_defaults(func=cmd_coalescence)

    p = sub.add_parser("bench", help="repeated-certificate timing per size")
    p.add_argument("cases", nargs="+", help="case files, one per system size")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--reps", type=int, default=200)
    p.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, CaseError, SingularMatrixError, BlockStructureError,
            cert.BasePointError, pf.NonConvergenceError,
            pf.SingularJacobianError, ValueError, KeyError, OSError) as exc:
        print(f"gridcert: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
