"""Solvability-region boundaries in 2-D injection slices.

For the 2-bus feeder both boundaries are known in closed form (with P, Q
the consumed load and R+jX the line impedance):

    certified:  sqrt((R^2+X^2)(P^2+Q^2)) <= 1/4
    true:       (RQ-XP)^2 + RP + XQ     <= 1/4

which coincide along the matching direction P/Q = R/X. For general feeders
the boundaries are traced numerically: rays in an affine 2-D slice through
the base injection, certificate radius by bisection, true radius by the
continuation loadability oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import cert, pf
from .linalg import as_complex_vector, inf_norm_vec
from .netmodel import NetworkModel


@dataclass(frozen=True)
class TwoBusCase:
    """Line impedance of the 2-bus feeder, p.u."""

    R: float
    X: float

    def __post_init__(self):
        if self.R < 0 or self.X < 0 or (self.R == 0 and self.X == 0):
            raise ValueError(f"need a nonzero impedance with R, X >= 0, "
                             f"got R={self.R}, X={self.X}")


def twobus_certified(case: TwoBusCase, P: float, Q: float) -> bool:
    """Certificate region for a zero-loading base: |z| |S| <= 1/4."""
    return math.sqrt((case.R ** 2 + case.X ** 2) * (P ** 2 + Q ** 2)) <= 0.25


def twobus_real(case: TwoBusCase, P: float, Q: float) -> bool:
    """Exact solvability of the 2-bus feeder: (RQ-XP)^2 + RP + XQ <= 1/4."""
    return (case.R * Q - case.X * P) ** 2 + case.R * P + case.X * Q <= 0.25


def twobus_real_radius(case: TwoBusCase, cos_phi: float) -> float:
    """Exact loadability along the constant-power-factor consumption ray.

    Solves (RQ-XP)^2 + RP + XQ = 1/4 for P = t cos(phi), Q = t sin(phi),
    t >= 0 (apparent-power magnitude at the true boundary).
    """
    sin_phi = math.sqrt(max(0.0, 1.0 - cos_phi ** 2))
    a = (case.R * sin_phi - case.X * cos_phi) ** 2
    b = case.R * cos_phi + case.X * sin_phi
    if a == 0.0:
        return 0.25 / b
    disc = b * b + a  # b^2 + 4 a (1/4)
    return (-b + math.sqrt(disc)) / (2.0 * a)


@dataclass(frozen=True)
class Plane:
    """Affine 2-D injection slice: s(lam, theta) = origin + lam * d(theta).

    ``d(theta) = cos(theta) d1 + sin(theta) d2`` in raw (un-normalized) plane
    units, so a traced radius lam plots at (lam cos(theta), lam sin(theta)).
    """

    d1: np.ndarray
    d2: np.ndarray
    label1: str = "d1"
    label2: str = "d2"

    def __post_init__(self):
        d1 = as_complex_vector(self.d1)
        d2 = as_complex_vector(self.d2)
        stacked = np.stack([np.concatenate([d1.real, d1.imag]),
                            np.concatenate([d2.real, d2.imag])])
        if np.linalg.matrix_rank(stacked) < 2:
            raise ValueError("plane basis directions are linearly dependent")

    def direction(self, theta: float) -> np.ndarray:
        return math.cos(theta) * self.d1 + math.sin(theta) * self.d2


def homogeneous_plane(model: NetworkModel) -> Plane:
    """Total-consumption slice: d1 loads every bus's P, d2 every bus's Q."""
    ones = np.ones(model.n, dtype=np.complex128)
    return Plane(d1=-ones, d2=-1j * ones, label1="total_P", label2="total_Q")


def single_bus_plane(model: NetworkModel, bus_id: int) -> Plane:
    """P-Q consumption slice of a single bus."""
    e = np.zeros(model.n, dtype=np.complex128)
    e[model.index_of(bus_id)] = 1.0
    return Plane(d1=-e, d2=-1j * e, label1=f"P_bus{bus_id}",
                 label2=f"Q_bus{bus_id}")


def homogeneous_direction(model: NetworkModel, cos_phi: float) -> np.ndarray:
    """Unit-norm direction loading every bus at power factor cos(phi)."""
    if not 0.0 < cos_phi <= 1.0:
        raise ValueError(f"power factor must be in (0, 1], got {cos_phi}")
    sin_phi = math.sqrt(max(0.0, 1.0 - cos_phi ** 2))
    return np.full(model.n, -(cos_phi + 1j * sin_phi), dtype=np.complex128)


@dataclass(frozen=True)
class BoundaryTrace:
    plane: Plane
    origin: np.ndarray
    r: float | None                      # fixed envelope radius, None = r-free
    thetas: np.ndarray
    certified_radius: np.ndarray
    true_radius: np.ndarray | None
    covering_ratio: np.ndarray | None


def trace_boundary_2d(base: cert.BasePoint, plane: Plane, n_rays: int = 180,
                      r: float | None = None, tol_rel: float = 1e-6,
                      with_true: bool = False) -> BoundaryTrace:
    """Trace the certified (and optionally true) boundary over a fan of rays.

    Per ray the certified radius is the largest gain at which the
    certificate still passes (the radius-free form by default, the fixed-r
    form when ``r`` is given), found by bracketing and bisection to relative
    width ``tol_rel``. True radii come from the continuation loadability
    oracle on the same rays.
    """
    if n_rays < 4:
        raise ValueError("need at least 4 rays")
    if r is not None and not 0.0 < r:
        raise ValueError(f"radius must be positive, got {r}")
    thetas = np.linspace(0.0, 2.0 * math.pi, n_rays, endpoint=False)
    certified = np.zeros(n_rays)
    true_r = np.zeros(n_rays) if with_true else None

    for i, theta in enumerate(thetas):
        d = plane.direction(theta)
        if r is None:
            def passes(lam: float) -> bool:
                return cert.certify(base, base.s_star + lam * d).passed
        else:
            def passes(lam: float) -> bool:
                return cert.certify_r(base, base.s_star + lam * d, r).passed
        certified[i] = cert._sup_on_ray(passes, 1.0, tol_rel)
        if with_true:
            nd = inf_norm_vec(d)
            true_r[i] = pf.loadability_limit(base.model, base.s_star, d / nd,
                                             tol_rel=tol_rel) / nd

    covering = None
    if with_true:
        with np.errstate(divide="ignore", invalid="ignore"):
            covering = np.where(true_r > 0, certified / true_r, np.nan)
    return BoundaryTrace(plane=plane, origin=base.s_star.copy(), r=r,
                         thetas=thetas, certified_radius=certified,
                         true_radius=true_r, covering_ratio=covering)


@dataclass(frozen=True)
class CoalescenceRow:
    cos_phi: float
    cot_phi: float
    lambda_b: float
    lambda_r: float
    covering_ratio: float


@dataclass(frozen=True)
class CoalescenceScan:
    rows: tuple[CoalescenceRow, ...]
    best: CoalescenceRow  # power factor maximizing the covering ratio


def coalescence_scan(base: cert.BasePoint, powerfactor_grid,
                     tol_rel: float = 1e-6) -> CoalescenceScan:
    """Covering ratio lambda_B / lambda_R across homogeneous power factors.

    Every grid power factor loads all buses along the constant-cos(phi)
    consumption direction; the maximizing entry approximates the feeder's
    matching P/Q ratio (near its average R/X).
    """
    grid = [float(c) for c in powerfactor_grid]
    if not grid:
        raise ValueError("empty power-factor grid")
    for c in grid:
        if not 0.0 < c <= 1.0:
            raise ValueError(f"power factor must be in (0, 1], got {c}")
    rows = []
    for c in grid:
        du = homogeneous_direction(base.model, c)
        lam_b = cert.certified_gain_direction(base, du, tol_rel=tol_rel)
        lam_r = pf.loadability_limit(base.model, base.s_star, du,
                                     tol_rel=tol_rel)
        sin_phi = math.sqrt(max(0.0, 1.0 - c * c))
        rows.append(CoalescenceRow(
            cos_phi=c, cot_phi=(c / sin_phi if sin_phi > 0 else math.inf),
            lambda_b=lam_b, lambda_r=lam_r,
            covering_ratio=(lam_b / lam_r if lam_r > 0 else math.nan),
        ))
    best = max(rows, key=lambda row: (row.covering_ratio
                                      if math.isfinite(row.covering_ratio)
                                      else -math.inf))
    return CoalescenceScan(rows=tuple(rows), best=best)


@dataclass(frozen=True)
class ScalingRow:
    n: int
    mean_certificate_time: float


@dataclass(frozen=True)
class ScalingResult:
    rows: tuple[ScalingRow, ...]
    loglog_slope: float | None  # None with fewer than two distinct sizes


def runtime_scaling(models, repetitions: int = 200) -> ScalingResult:
    """Mean repeated-certificate time per system size, plus a log-log slope.

    Each model gets one prebuilt base point (Z and the J-inverse blocks are
    computed once and reused); the timed unit is a single certificate
    evaluation against it. The first 10% of repetitions are warm-up and are
    discarded.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rows = []
    for model in models:
        base = cert.base_point(model, model.s_base)
        probe = 0.5 * model.s_base + 0.01 * homogeneous_direction(model, 0.9)
        warmup = max(1, repetitions // 10)
        times = []
        for k in range(warmup + repetitions):
            t0 = time.perf_counter()
            cert.certify(base, probe)
            dt = time.perf_counter() - t0
            if k >= warmup:
                times.append(dt)
        rows.append(ScalingRow(n=model.n,
                               mean_certificate_time=float(np.mean(times))))
    rows.sort(key=lambda row: row.n)

    slope = None
    sizes = sorted({row.n for row in rows})
    if len(sizes) >= 2:
        xs = np.log([row.n for row in rows])
        ys = np.log([row.mean_certificate_time for row in rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return ScalingResult(rows=tuple(rows), loglog_slope=slope)
