"""Brouwer fixed-point solvability certificates.

Around a solved base point (V_base, s_base) define

    Z = diag(conj(V_base))^-1 conj(Y)^-1 diag(V_base)^-1
    J = [[I, conj(Z) diag(conj(s_base))], [Z diag(s_base), I]],
    J^-1 = [[M, N], [conj(N), conj(M)]]

and, for a candidate injection s with ds = s - s_base, the norm terms

    a_vec = || M conj(Z) conj(ds) + N Z ds ||            (vector)
    a_mat = || M conj(Z) diag(conj(ds)) + N Z diag(ds) ||
    b     = || J^-1 || * || Z diag(s) ||
    c1    = || M conj(Z) diag(conj(ds)) + N diag(Z ds) ||
    c2    = || M diag(conj(Z ds)) + N Z diag(ds) ||

(all infinity norms). The radius-r certificate guarantees a power-flow
solution whenever

    a_vec / r + b * r + c1 + c2 <= 1

with the solution's voltage magnitudes inside [|V_base_i|/(1+r),
|V_base_i|/(1-r)] when r < 1. Optimizing the radius away (with the matrix
variant of the first term) gives the r-free certificate

    2 sqrt(a_mat * b) + c1 + c2 <= 1

whose minimizing radius is sqrt(a_mat / b). The strong form replaces the
deviation-dependent norms with A = ||M conj(Z)|| + ||N Z|| and
B = ||J^-1|| ||Z||, yielding a direction-independent admissible gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pf
from .linalg import (JStarBlocks, as_complex_vector, assemble_jstar,
                     inf_norm_mat, inf_norm_vec, invert_dense)
from .netmodel import NetworkModel

_INVARIANT_TOL = 1e-8


class BasePointError(RuntimeError):
    """Base point construction failed an internal consistency check."""


@dataclass(frozen=True)
class BasePoint:
    """A solved operating point with everything certificates reuse.

    The heavy pieces (Z, the J-inverse blocks and the fixed norm products)
    are computed once here; certifying an injection against the base point
    is then a handful of O(n^2) scalings and norms.
    """

    model: NetworkModel
    V_star: np.ndarray
    s_star: np.ndarray
    Z_star: np.ndarray
    blocks: JStarBlocks
    gamma_star: np.ndarray
    # Cached products for the certificate terms.
    MZc: np.ndarray          # M conj(Z)
    NZ: np.ndarray           # N Z
    strong_A: float          # ||M conj(Z)|| + ||N Z||
    strong_B: float          # ||J^-1|| ||Z||
    sigma: float             # ||s_base||_inf

    @property
    def n(self) -> int:
        return self.model.n


@dataclass(frozen=True)
class CertificateReport:
    lhs: float
    passed: bool
    margin: float
    r_used: float | None
    envelope: tuple[tuple[float, float], ...] | None
    term_breakdown: dict[str, float]


@dataclass(frozen=True)
class GainReport:
    lambda_cag: float
    lambda_m: float
    cap: float
    lambda_b: float | None = None
    lambda_r: float | None = None
    direction: np.ndarray | None = None
    no_certified_gain: bool = False


def base_point(model: NetworkModel, s_star, V_init=None,
               tol: float = pf.DEFAULT_TOL) -> BasePoint:
    """Solve the power flow at ``s_star`` and assemble the certificate base.

    Raises pf.NonConvergenceError when the base injection is unsolvable and
    linalg.SingularMatrixError when the base point sits at the certificate
    validity limit (singular J).
    """
    sv = as_complex_vector(s_star)
    sol = pf.newton_pf(model, sv, V_init=V_init, tol=tol)
    v = sol.V

    y_conj_inv, _ = invert_dense(np.conj(model.Y))
    z = (1.0 / np.conj(v))[:, None] * y_conj_inv * (1.0 / v)[None, :]

    n = model.n
    resid = inf_norm_mat(
        np.conj(model.Y) @ (np.conj(v)[:, None] * z * v[None, :]) - np.eye(n)
    )
    if resid > 1e-9 * max(n, 1):
        raise BasePointError(f"Z reconstruction residual {resid:.3e} too large")

    blocks = assemble_jstar(z, sv)
    gamma = model.V_zero / v
    ident = np.conj(z @ sv) + gamma - 1.0
    dev = inf_norm_vec(ident)
    if dev > _INVARIANT_TOL:
        raise BasePointError(
            f"base point identity eta(s)+gamma=1 violated by {dev:.3e}"
        )

    mzc = blocks.M @ np.conj(z)
    nz = blocks.N @ z
    return BasePoint(
        model=model, V_star=v, s_star=sv, Z_star=z, blocks=blocks,
        gamma_star=gamma, MZc=mzc, NZ=nz,
        strong_A=inf_norm_mat(mzc) + inf_norm_mat(nz),
        strong_B=blocks.inv_jstar_norm * inf_norm_mat(z),
        sigma=inf_norm_vec(sv),
    )


def zeta(base: BasePoint, s) -> np.ndarray:
    """conj(Z) diag(conj(s)) as an explicit matrix."""
    sv = as_complex_vector(s)
    return np.conj(base.Z_star) * np.conj(sv)[None, :]


def eta(base: BasePoint, s) -> np.ndarray:
    """conj(Z s) as a vector."""
    return np.conj(base.Z_star @ as_complex_vector(s))


@dataclass(frozen=True)
class CertTerms:
    """The five norm quantities entering the certificates (see module doc)."""

    a_vec: float
    a_mat: float
    b: float
    c1: float
    c2: float

    def breakdown(self) -> dict[str, float]:
        return {"deviation_vec": self.a_vec, "deviation_mat": self.a_mat,
                "radius_coeff": self.b, "linear_conj": self.c1,
                "linear_direct": self.c2}


def certificate_terms(base: BasePoint, s) -> CertTerms:
    sv = as_complex_vector(s)
    if sv.shape[0] != base.n:
        raise ValueError(f"expected injection vector of length {base.n}")
    ds = sv - base.s_star
    dsc = np.conj(ds)
    u = base.Z_star @ ds
    m, nn = base.blocks.M, base.blocks.N

    a_vec = inf_norm_vec(m @ np.conj(u) + nn @ u)
    a_mat = inf_norm_mat(base.MZc * dsc[None, :] + base.NZ * ds[None, :])
    b = base.blocks.inv_jstar_norm * inf_norm_mat(base.Z_star * sv[None, :])
    c1 = inf_norm_mat(base.MZc * dsc[None, :] + nn * u[None, :])
    c2 = inf_norm_mat(m * np.conj(u)[None, :] + base.NZ * ds[None, :])
    return CertTerms(a_vec=a_vec, a_mat=a_mat, b=b, c1=c1, c2=c2)


def _envelope(v_star: np.ndarray, r: float) -> tuple[tuple[float, float], ...]:
    mags = np.abs(v_star)
    return tuple((float(m / (1.0 + r)), float(m / (1.0 - r))) for m in mags)


def certify_r(base: BasePoint, s, r: float) -> CertificateReport:
    """Radius-r certificate: a_vec/r + b*r + c1 + c2 <= 1.

    A passing report proves the injection is solvable with a voltage inside
    the radius-r envelope (populated when r < 1).
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    t = certificate_terms(base, s)
    lhs = t.a_vec / r + t.b * r + t.c1 + t.c2
    return CertificateReport(
        lhs=lhs, passed=lhs <= 1.0, margin=1.0 - lhs, r_used=r,
        envelope=_envelope(base.V_star, r) if r < 1.0 else None,
        term_breakdown=t.breakdown(),
    )


def certify(base: BasePoint, s) -> CertificateReport:
    """Radius-free certificate: 2 sqrt(a_mat*b) + c1 + c2 <= 1.

    ``r_used`` is the radius sqrt(a_mat/b) achieving the minimum of
    a_mat/r + b*r (reported when b > 0); any injection passing here also
    passes certify_r at that radius.
    """
    t = certificate_terms(base, s)
    lhs = 2.0 * math.sqrt(t.a_mat * t.b) + t.c1 + t.c2
    r_used = math.sqrt(t.a_mat / t.b) if t.b > 0 else None
    return CertificateReport(
        lhs=lhs, passed=lhs <= 1.0, margin=1.0 - lhs, r_used=r_used,
        envelope=(_envelope(base.V_star, r_used)
                  if r_used is not None and 0.0 < r_used < 1.0 else None),
        term_breakdown=t.breakdown(),
    )


def minimal_certified_radius(base: BasePoint, s) -> float | None:
    """Smallest radius at which the radius-r certificate passes, else None.

    Solves b r^2 - (1 - c1 - c2) r + a_vec <= 0 for its lower root; the
    resulting radius gives the tightest voltage envelope the certificate can
    guarantee for this injection.
    """
    t = certificate_terms(base, s)
    slack = 1.0 - t.c1 - t.c2
    if slack < 0:
        return None
    if t.a_vec == 0.0:
        return 0.0
    if t.b == 0.0:
        return t.a_vec / slack if slack > 0 else None
    disc = slack * slack - 4.0 * t.a_vec * t.b
    if disc < 0:
        return None
    return (slack - math.sqrt(disc)) / (2.0 * t.b)


def envelope_violations(base: BasePoint, r: float, V,
                        rtol: float = 1e-12) -> list[int]:
    """Indices whose voltage magnitude falls outside the radius-r envelope."""
    v = as_complex_vector(V)
    mags = np.abs(v)
    ref = np.abs(base.V_star)
    lo = ref / (1.0 + r)
    hi = ref / (1.0 - r) if r < 1.0 else np.full_like(ref, np.inf)
    bad = (mags < lo * (1.0 - rtol)) | (mags > hi * (1.0 + rtol))
    return [int(i) for i in np.nonzero(bad)[0]]


def _sup_on_ray(passes, hi0: float, tol_rel: float,
                max_doublings: int = 200) -> float:
    """Largest lambda with ``passes(lambda)`` true on a ray-interval set."""
    lo = 0.0
    hi = hi0
    for _ in range(max_doublings):
        if not passes(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("certificate never fails along this ray")
    while hi - lo > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def certified_gain_direction(base: BasePoint, direction,
                             tol_rel: float = 1e-6) -> float:
    """Largest gain along a unit direction still passing the certificate.

    The certified set's intersection with a ray from the base point is an
    interval, so bracketing plus bisection finds its endpoint.
    """
    du = as_complex_vector(direction)
    nrm = inf_norm_vec(du)
    if nrm == 0:
        raise ValueError("zero loading direction is undefined")
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"direction must have unit infinity norm, got {nrm}")

    seed = certified_admissible_gain(base)
    hi0 = 4.0 * seed.lambda_cag + 1.0
    return _sup_on_ray(
        lambda lam: certify(base, base.s_star + lam * du).passed, hi0, tol_rel
    )


def certified_admissible_gain(base: BasePoint, direction=None,
                              tol_rel: float = 1e-6,
                              true_limit: bool = False) -> GainReport:
    """Direction-independent certified gain from the strong-form certificate.

    With A = ||M conj(Z)|| + ||N Z||, B = ||J^-1|| ||Z|| and sigma the base
    injection norm, the strong form holds with equality at the larger
    positive root lambda_M of

        (4AB - 4A^2) x^2 + (4AB sigma + 4A) x - 1 = 0

    (linear when B = A), and the certified admissible gain caps it at
    0.5/A so the equality branch stays valid. When ``direction`` is given
    the per-direction certified gain lambda_b is attached, plus the true
    loadability lambda_r when ``true_limit`` is also set.
    """
    a, b, sigma = base.strong_A, base.strong_B, base.sigma
    if a == 0.0:
        raise BasePointError("degenerate network: strong-form coefficient A is 0")
    cap = 0.5 / a

    qa = 4.0 * a * (b - a)
    qb = 4.0 * a * (b * sigma + 1.0)
    no_gain = False
    if abs(qa) <= 1e-14 * max(4.0 * a * max(b, a), 1.0):
        lam_m = 1.0 / qb
    else:
        disc = qb * qb + 4.0 * qa
        if disc < 0:
            lam_m, no_gain = 0.0, True
        else:
            roots = [(-qb + math.sqrt(disc)) / (2.0 * qa),
                     (-qb - math.sqrt(disc)) / (2.0 * qa)]
            pos = [x for x in roots if x > 0]
            if pos:
                lam_m = max(pos)
            else:
                lam_m, no_gain = 0.0, True

    lam_cag = 0.0 if no_gain else min(lam_m, cap)
    lam_b = lam_r = None
    du = None
    if direction is not None:
        du = as_complex_vector(direction)
        lam_b = certified_gain_direction(base, du, tol_rel=tol_rel)
        if true_limit:
            lam_r = pf.loadability_limit(base.model, base.s_star, du,
                                         tol_rel=tol_rel)
    return GainReport(lambda_cag=lam_cag, lambda_m=lam_m, cap=cap,
                      lambda_b=lam_b, lambda_r=lam_r, direction=du,
                      no_certified_gain=no_gain)
