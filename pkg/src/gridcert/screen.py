"""Injection-cloud screening and the effective solvability index.

The fast screen classifies a cloud of candidate injections by solving the
power flow only at seed points: the first unclassified point is solved
(Newton, with a zero-injection continuation fallback), and on success every
remaining point is tested against the seed's certificate; certified points
need no power-flow run at all. The brute screen is the baseline that sends
every point through the same solve-or-continue oracle, so its PF call count
is an upper bound for the fast screen's by construction.
"""

from __future__ import annotations

import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cert, pf
from .linalg import SingularMatrixError, as_complex_vector
from .netmodel import NetworkModel

CLASS_SEED = "seed"
CLASS_CERTIFIED = "certified"
CLASS_INSOLVABLE = "insolvable"


@dataclass(frozen=True)
class SamplingSpec:
    """Uniform sampling descriptor: per-bus range as a fraction of base.

    Each varied bus draws P and Q independently and uniformly within
    +-range_frac * |base component|; unvaried buses stay at base. A bus
    whose base component is zero therefore never moves.
    """

    n_points: int
    range_frac: float
    bus_indices: tuple[int, ...] | None = None  # None = vary all PQ buses


@dataclass(frozen=True)
class InjectionCloud:
    points: np.ndarray          # (k, n) complex
    seed: int
    spec: SamplingSpec
    center: np.ndarray          # injection the sampling is centered on

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ScreenResult:
    solvable: tuple[int, ...]
    insolvable: tuple[int, ...]
    seeds_used: tuple[int, ...]
    pf_calls: int               # injections sent to the PF/CPF oracle
    newton_calls: int           # individual Newton invocations behind them
    certificate_calls: int
    wall_time_s: float
    unverified_insolvable: int  # insolvable = oracle failure, never a proof
    classification: tuple[str, ...]
    certifying_seed: tuple[int | None, ...]
    cert_lhs: tuple[float | None, ...]


def sample_injections(model: NetworkModel, spec: SamplingSpec,
                      seed: int) -> InjectionCloud:
    """Deterministic uniform cloud around the model's base injection."""
    if spec.n_points < 1:
        raise ValueError("need at least one sample point")
    if not np.isfinite(spec.range_frac) or spec.range_frac < 0:
        raise ValueError(f"range_frac must be finite and >= 0, got {spec.range_frac}")
    varied = (tuple(range(model.n)) if spec.bus_indices is None
              else tuple(spec.bus_indices))
    if spec.bus_indices is not None:
        if len(varied) == 0:
            raise ValueError("varied-bus subset must be nonempty")
        for i in varied:
            if not 0 <= i < model.n:
                raise ValueError(f"bus index {i} out of range 0..{model.n - 1}")

    center = model.s_base
    rng = np.random.default_rng(seed)
    pts = np.tile(center, (spec.n_points, 1))
    cols = np.asarray(varied, dtype=int)
    half_p = spec.range_frac * np.abs(center.real[cols])
    half_q = spec.range_frac * np.abs(center.imag[cols])
    dp = rng.uniform(-1.0, 1.0, size=(spec.n_points, cols.size)) * half_p
    dq = rng.uniform(-1.0, 1.0, size=(spec.n_points, cols.size)) * half_q
    pts[:, cols] += dp + 1j * dq
    return InjectionCloud(points=pts, seed=seed, spec=spec, center=center.copy())


def _oracle(model: NetworkModel, s, tol: float) -> tuple[pf.PFSolution | None, int]:
    """Solve-or-continue oracle shared by both screeners.

    Flat-start Newton first, zero-injection continuation with warm steps as
    the fallback. Returns (solution_or_None, newton_invocations).
    """
    sol = pf.newton_pf(model, s, tol=tol, raise_on_fail=False)
    if sol.converged:
        return sol, 1
    cont, calls = pf.continuation_solve(model, s, tol=tol)
    return cont, calls + 1


def fast_screen(model: NetworkModel, cloud: InjectionCloud,
                tol: float = pf.DEFAULT_TOL, threads: int = 1) -> ScreenResult:
    """Seed-and-certify screening of an injection cloud.

    Points are taken in input order. Each seed is solved by the PF/CPF
    oracle; a solvable seed becomes a certificate base point against which
    every remaining point is tested, and certified points are classified
    solvable without any power-flow run. An unsolvable seed goes to the
    insolvable set. Results are deterministic and independent of the
    worker-thread count.
    """
    if len(cloud) == 0:
        raise ValueError("empty injection cloud")
    t0 = time.perf_counter()
    k = len(cloud)
    remaining = deque(range(k))
    solvable: list[int] = []
    insolvable: list[int] = []
    seeds: list[int] = []
    classification: list[str | None] = [None] * k
    certifying_seed: list[int | None] = [None] * k
    cert_lhs: list[float | None] = [None] * k
    pf_calls = newton_calls = certificate_calls = 0

    while remaining:
        idx = remaining.popleft()
        s = cloud.points[idx]
        sol, calls = _oracle(model, s, tol)
        pf_calls += 1
        newton_calls += calls
        if sol is None:
            insolvable.append(idx)
            classification[idx] = CLASS_INSOLVABLE
            continue

        solvable.append(idx)
        seeds.append(idx)
        classification[idx] = CLASS_SEED
        try:
            base = cert.base_point(model, s, V_init=sol.V, tol=tol)
        except (SingularMatrixError, cert.BasePointError,
                pf.NonConvergenceError):
            continue  # seed solvable but unusable as a base; keep screening

        pending = list(remaining)
        if threads > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                reports = list(pool.map(
                    lambda j: cert.certify(base, cloud.points[j]), pending))
        else:
            reports = [cert.certify(base, cloud.points[j]) for j in pending]
        certificate_calls += len(pending)

        kept = deque()
        for j, rep in zip(pending, reports):
            if rep.passed:
                solvable.append(j)
                classification[j] = CLASS_CERTIFIED
                certifying_seed[j] = idx
                cert_lhs[j] = rep.lhs
            else:
                kept.append(j)
        remaining = kept

    return ScreenResult(
        solvable=tuple(solvable), insolvable=tuple(insolvable),
        seeds_used=tuple(seeds), pf_calls=pf_calls, newton_calls=newton_calls,
        certificate_calls=certificate_calls,
        wall_time_s=time.perf_counter() - t0,
        unverified_insolvable=len(insolvable),
        classification=tuple(classification),
        certifying_seed=tuple(certifying_seed), cert_lhs=tuple(cert_lhs),
    )


def brute_screen(model: NetworkModel, cloud: InjectionCloud,
                 tol: float = pf.DEFAULT_TOL) -> ScreenResult:
    """Baseline screening: every point goes through the PF/CPF oracle."""
    if len(cloud) == 0:
        raise ValueError("empty injection cloud")
    t0 = time.perf_counter()
    k = len(cloud)
    solvable: list[int] = []
    insolvable: list[int] = []
    classification: list[str] = []
    pf_calls = newton_calls = 0
    for idx in range(k):
        sol, calls = _oracle(model, cloud.points[idx], tol)
        pf_calls += 1
        newton_calls += calls
        if sol is None:
            insolvable.append(idx)
            classification.append(CLASS_INSOLVABLE)
        else:
            solvable.append(idx)
            classification.append(CLASS_SEED)
    return ScreenResult(
        solvable=tuple(solvable), insolvable=tuple(insolvable),
        seeds_used=tuple(solvable), pf_calls=pf_calls,
        newton_calls=newton_calls, certificate_calls=0,
        wall_time_s=time.perf_counter() - t0,
        unverified_insolvable=len(insolvable),
        classification=tuple(classification),
        certifying_seed=(None,) * k, cert_lhs=(None,) * k,
    )


def solvability_index(base: cert.BasePoint, cloud: InjectionCloud) -> float:
    """Fraction of the cloud certified by this single base point (no PF)."""
    if len(cloud) == 0:
        raise ValueError("empty injection cloud")
    hits = sum(1 for p in cloud.points if cert.certify(base, p).passed)
    return hits / len(cloud)
