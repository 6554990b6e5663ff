"""Ground-truth power-flow machinery.

The compact complex power-flow equation solved here is

    diag(V) conj(Y (V - V0_vec)) = s

for PQ-bus voltages V, with V0_vec the zero-injection profile. A damped
Newton iteration on the real/imaginary split serves as the solvability
oracle; a warm-started bracketing/bisection continuation provides true
loading limits along injection rays. The fixed-point form of the same
equation (in the deviation variable y = V_base/V - 1) backs the
certificate self-map tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .linalg import as_complex_vector, inf_norm_vec
from .netmodel import NetworkModel

if TYPE_CHECKING:  # pragma: no cover
    from .cert import BasePoint

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50
_MAX_HALVINGS = 30


class NonConvergenceError(RuntimeError):
    """Newton failed; carries the last iterate and its mismatch."""

    def __init__(self, message: str, solution: "PFSolution"):
        super().__init__(message)
        self.solution = solution


class SingularJacobianError(RuntimeError):
    """Jacobian singular at an iterate."""


@dataclass(frozen=True)
class PFSolution:
    V: np.ndarray
    iterations: int
    final_mismatch: float
    converged: bool


@dataclass(frozen=True)
class FixedPointState:
    """Deviation variable y = V_base/V - 1 and gamma = V0_vec/V_base."""

    y: np.ndarray
    gamma_star: np.ndarray


def pf_residual(model: NetworkModel, V, s) -> np.ndarray:
    """Componentwise power mismatch diag(V) conj(Y (V - V0_vec)) - s."""
    v = as_complex_vector(V)
    sv = as_complex_vector(s)
    if v.shape[0] != model.n or sv.shape[0] != model.n:
        raise ValueError(f"expected vectors of length {model.n}")
    if np.any(v == 0):
        raise ValueError("zero voltage component in residual evaluation")
    return v * np.conj(model.Y @ (v - model.V_zero)) - sv


def newton_pf(model: NetworkModel, s, V_init=None, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER,
              raise_on_fail: bool = True) -> PFSolution:
    """Damped Newton on the real/imaginary split of the power-flow equation.

    Starts from the zero-injection profile unless ``V_init`` is given. Full
    Newton steps are halved (up to 30 times) whenever the mismatch norm
    fails to decrease. With ``raise_on_fail`` unset, failure is reported
    through the ``converged`` flag instead of NonConvergenceError; a singular
    Jacobian still raises SingularJacobianError when ``raise_on_fail`` is set.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    sv = as_complex_vector(s)
    if sv.shape[0] != model.n:
        raise ValueError(f"expected injection vector of length {model.n}")
    v = model.V_zero.copy() if V_init is None else as_complex_vector(V_init).copy()
    if np.any(v == 0):
        raise ValueError("V_init has a zero component")

    n = model.n
    yc = np.conj(model.Y)
    f = v * np.conj(model.Y @ (v - model.V_zero)) - sv
    mis = inf_norm_vec(f)
    iters = 0

    while mis > tol and iters < max_iter:
        i_inj = model.Y @ (v - model.V_zero)
        dfda = np.diag(np.conj(i_inj)) + v[:, None] * yc
        dfdb = 1j * np.diag(np.conj(i_inj)) - 1j * (v[:, None] * yc)
        jac = np.empty((2 * n, 2 * n))
        jac[:n, :n] = dfda.real
        jac[:n, n:] = dfdb.real
        jac[n:, :n] = dfda.imag
        jac[n:, n:] = dfdb.imag
        rhs = np.concatenate([f.real, f.imag])
        try:
            dx = np.linalg.solve(jac, -rhs)
        except np.linalg.LinAlgError:
            sol = PFSolution(V=v, iterations=iters, final_mismatch=mis,
                             converged=False)
            if raise_on_fail:
                raise SingularJacobianError(
                    f"singular Jacobian at iteration {iters}"
                ) from None
            return sol
        dv = dx[:n] + 1j * dx[n:]

        # Halve the step until the mismatch norm actually decreases.
        alpha = 1.0
        improved = False
        for _ in range(_MAX_HALVINGS + 1):
            v_new = v + alpha * dv
            if not np.any(v_new == 0):
                f_new = v_new * np.conj(model.Y @ (v_new - model.V_zero)) - sv
                mis_new = inf_norm_vec(f_new)
                if mis_new < mis:
                    v, f, mis = v_new, f_new, mis_new
                    improved = True
                    break
            alpha *= 0.5
        iters += 1
        if not improved:
            break

    sol = PFSolution(V=v, iterations=iters, final_mismatch=mis,
                     converged=mis <= tol)
    if not sol.converged and raise_on_fail:
        raise NonConvergenceError(
            f"Newton stalled after {iters} iterations, mismatch {mis:.3e}", sol
        )
    return sol


def fixed_point_state(base: "BasePoint", V) -> FixedPointState:
    """Deviation state of a voltage vector relative to a base point."""
    v = as_complex_vector(V)
    if np.any(v == 0):
        raise ValueError("zero voltage component")
    return FixedPointState(y=base.V_star / v - 1.0, gamma_star=base.gamma_star)


def fixed_point_rhs(base: "BasePoint", s, y) -> np.ndarray:
    """One application of the fixed-point map behind the certificate.

    In the deviation variable y = V_base/V - 1 the power-flow equation reads
    y = RHS(y); the returned vector is that right-hand side:

        -(M eta + N conj(eta))
        - (M (y * (zeta(s) conj(y))) + N (conj(y) * (conj(zeta(s)) y)))
        - (M diag(eta) + N conj(zeta(ds))) y
        - (M zeta(ds) + N diag(conj(eta))) conj(y)

    with ds = s - s_base, eta = conj(Z ds) and zeta(s) = conj(Z) diag(conj s).
    A certified injection makes this map send the ball ||y|| <= r into itself.
    """
    sv = as_complex_vector(s)
    yv = as_complex_vector(y)
    m, nn, z = base.blocks.M, base.blocks.N, base.Z_star
    ds = sv - base.s_star
    u = z @ ds                       # eta(ds) = conj(u)
    eta = np.conj(u)
    yc = np.conj(yv)

    t_const = m @ eta + nn @ u
    t_quad = (m @ (yv * (np.conj(z) @ (np.conj(sv) * yc)))
              + nn @ (yc * (z @ (sv * yv))))
    t_lin_y = m @ (eta * yv) + nn @ (z @ (ds * yv))
    t_lin_yc = m @ (np.conj(z) @ (np.conj(ds) * yc)) + nn @ (u * yc)
    return -(t_const + t_quad + t_lin_y + t_lin_yc)


def _attempt(model: NetworkModel, s, starts, tol, max_iter) -> PFSolution | None:
    """First converged Newton run over a list of start vectors, else None."""
    for v0 in starts:
        if v0 is None:
            continue
        try:
            sol = newton_pf(model, s, V_init=v0, tol=tol, max_iter=max_iter,
                            raise_on_fail=False)
        except ValueError:
            continue
        if sol.converged:
            return sol
    return None


def continuation_solve(model: NetworkModel, s, tol: float = DEFAULT_TOL,
                       min_step: float = 1e-3) -> tuple[PFSolution | None, int]:
    """Walk from the zero injection toward ``s`` with warm starts.

    Serves as the fallback when a direct Newton run fails: the zero
    injection is always solvable (by V0_vec exactly), and each accepted step
    warm-starts the next. Returns (solution_or_None, newton_calls).
    """
    sv = as_complex_vector(s)
    v = model.V_zero.copy()
    t, h, calls = 0.0, 1.0, 0
    while t < 1.0:
        h = min(h, 1.0 - t)
        sol = newton_pf(model, sv * (t + h), V_init=v, tol=tol,
                        raise_on_fail=False)
        calls += 1
        if sol.converged:
            t += h
            v = sol.V
            h *= 2.0
        else:
            h *= 0.5
            if h < min_step:
                return None, calls
    return PFSolution(V=v, iterations=0, final_mismatch=0.0, converged=True), calls


def loadability_limit(model: NetworkModel, s_star, direction,
                      tol_rel: float = 1e-6, tol: float = DEFAULT_TOL) -> float:
    """Largest gain lambda with a solvable injection s_star + lambda*direction.

    The ray is probed by geometric bracketing followed by bisection to
    relative width ``tol_rel``; every accepted step warm-starts the next, and
    a failed warm start is retried from the flat profile before the point is
    declared unsolvable. ``direction`` must have unit infinity norm.
    """
    sv = as_complex_vector(s_star)
    du = as_complex_vector(direction)
    nrm = inf_norm_vec(du)
    if nrm == 0:
        raise ValueError("zero loading direction is undefined")
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"direction must have unit infinity norm, got {nrm}")
    if tol_rel <= 0:
        raise ValueError("tol_rel must be positive")

    base_sol = newton_pf(model, sv, tol=tol)  # raises if base unsolvable
    v_warm = base_sol.V

    def solvable_at(lam: float) -> PFSolution | None:
        return _attempt(model, sv + lam * du, [v_warm, model.V_zero],
                        tol, DEFAULT_MAX_ITER)

    lo = 0.0
    hi = inf_norm_vec(sv) + 1.0
    for _ in range(200):
        sol = solvable_at(hi)
        if sol is None:
            break
        lo, v_warm = hi, sol.V
        hi *= 2.0
    else:
        raise RuntimeError("no unsolvable point found along the ray")

    while hi - lo > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        sol = solvable_at(mid)
        if sol is None:
            hi = mid
        else:
            lo, v_warm = mid, sol.V
    return lo
