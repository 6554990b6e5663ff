"""Serialization of results to JSON/CSV artifacts.

Every artifact embeds the configuration that produced it (command echo and
seed) so a run can be reproduced exactly. CSV numbers are written with 12
significant digits; JSON numbers are not rounded.
"""

from __future__ import annotations

import io
import json
from typing import Any

import numpy as np

from .boundary import BoundaryTrace, CoalescenceScan, ScalingResult
from .cert import CertificateReport, GainReport
from .netmodel import NetworkModel
from .screen import InjectionCloud, ScreenResult


def _f(x: float) -> str:
    return "%.12g" % x


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, default=_jsonable, allow_nan=False)


def _clean(x):
    """NaN/Inf -> None so the JSON stays standard."""
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def certificate_report_doc(report: CertificateReport, meta: dict) -> dict:
    return {
        "config": meta,
        "lhs": report.lhs,
        "passed": report.passed,
        "margin": report.margin,
        "r_used": report.r_used,
        "envelope": ([{"lo": lo, "hi": _clean(hi)} for lo, hi in report.envelope]
                     if report.envelope is not None else None),
        "term_breakdown": report.term_breakdown,
    }


def gain_report_doc(report: GainReport, meta: dict) -> dict:
    return {
        "config": meta,
        "lambda_cag": report.lambda_cag,
        "lambda_m": report.lambda_m,
        "cap": report.cap,
        "lambda_b": report.lambda_b,
        "lambda_r": report.lambda_r,
        "direction": _jsonable(report.direction),
        "no_certified_gain": report.no_certified_gain,
    }


def screen_result_doc(result: ScreenResult, cloud: InjectionCloud,
                      meta: dict) -> dict:
    return {
        "config": meta,
        "seed": cloud.seed,
        "sampling": {"n_points": cloud.spec.n_points,
                     "range_frac": cloud.spec.range_frac,
                     "bus_indices": (list(cloud.spec.bus_indices)
                                     if cloud.spec.bus_indices is not None
                                     else None)},
        "solvable": list(result.solvable),
        "insolvable": list(result.insolvable),
        "seeds_used": list(result.seeds_used),
        "counters": {"pf_calls": result.pf_calls,
                     "newton_calls": result.newton_calls,
                     "certificate_calls": result.certificate_calls,
                     "unverified_insolvable": result.unverified_insolvable},
        "wall_time_s": result.wall_time_s,
    }


def screen_result_csv(result: ScreenResult, cloud: InjectionCloud,
                      model: NetworkModel) -> str:
    """One row per point: injection, classification, certifying seed, lhs."""
    out = io.StringIO()
    cols = ["point", "classification", "certifying_seed", "certificate_lhs"]
    for bus in model.bus_ids:
        cols += [f"P_{bus}", f"Q_{bus}"]
    out.write(",".join(cols) + "\n")
    for idx in range(len(cloud)):
        seed = result.certifying_seed[idx]
        lhs = result.cert_lhs[idx]
        row = [str(idx), result.classification[idx],
               "" if seed is None else str(seed),
               "" if lhs is None else _f(lhs)]
        for v in cloud.points[idx]:
            row += [_f(v.real), _f(v.imag)]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def boundary_trace_csv(trace: BoundaryTrace) -> str:
    """One row per ray: theta, certified_radius, true_radius, covering_ratio."""
    out = io.StringIO()
    out.write("theta,certified_radius,true_radius,covering_ratio\n")
    for i, theta in enumerate(trace.thetas):
        tr = "" if trace.true_radius is None else _f(trace.true_radius[i])
        cv = ""
        if trace.covering_ratio is not None and np.isfinite(trace.covering_ratio[i]):
            cv = _f(trace.covering_ratio[i])
        out.write(f"{_f(theta)},{_f(trace.certified_radius[i])},{tr},{cv}\n")
    return out.getvalue()


def boundary_trace_doc(trace: BoundaryTrace, meta: dict) -> dict:
    return {
        "config": meta,
        "r": trace.r,
        "plane": {"label1": trace.plane.label1, "label2": trace.plane.label2,
                  "d1": _jsonable(trace.plane.d1), "d2": _jsonable(trace.plane.d2),
                  "origin": _jsonable(trace.origin)},
        "theta": trace.thetas.tolist(),
        "certified_radius": trace.certified_radius.tolist(),
        "true_radius": (None if trace.true_radius is None
                        else trace.true_radius.tolist()),
        "covering_ratio": (None if trace.covering_ratio is None
                           else [_clean(float(x)) for x in trace.covering_ratio]),
    }


def coalescence_doc(scan: CoalescenceScan, meta: dict) -> dict:
    return {
        "config": meta,
        "rows": [{"cos_phi": r.cos_phi, "cot_phi": _clean(r.cot_phi),
                  "lambda_b": r.lambda_b, "lambda_r": r.lambda_r,
                  "covering_ratio": _clean(r.covering_ratio)}
                 for r in scan.rows],
        "best": {"cos_phi": scan.best.cos_phi, "cot_phi": _clean(scan.best.cot_phi),
                 "covering_ratio": _clean(scan.best.covering_ratio)},
    }


def scaling_doc(result: ScalingResult, meta: dict) -> dict:
    return {
        "config": meta,
        "rows": [{"n": r.n, "mean_certificate_time": r.mean_certificate_time}
                 for r in result.rows],
        "loglog_slope": result.loglog_slope,
    }


def load_injection_map(text: str, model: NetworkModel) -> np.ndarray:
    """Injection file: {"injections": {bus_id: {"P": .., "Q": ..}}} in p.u.

    Values are absolute net injections (consumption negative); buses not
    listed keep the model's base injection.
    """
    doc = json.loads(text)
    table = doc.get("injections", doc)
    s = model.s_base.astype(np.complex128).copy()
    for key, pq in table.items():
        i = model.index_of(int(key))
        s[i] = complex(float(pq.get("P", 0.0)), float(pq.get("Q", 0.0)))
    return s
