import numpy as np
import pytest

from gridcert import cert
from gridcert.pf import (NonConvergenceError, continuation_solve,
                         fixed_point_rhs, fixed_point_state, loadability_limit,
                         newton_pf, pf_residual)


def rand_complex(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


# ---------------------------------------------------------------- residual

def test_residual_zero_injection_profile(case33_model):
    m = case33_model
    r = pf_residual(m, m.V_zero, np.zeros(m.n, complex))
    assert np.max(np.abs(r)) < 1e-12


def test_residual_two_bus_trivial(case2_model):
    r = pf_residual(case2_model, np.array([1.0 + 0j]), np.array([0.1 + 0j]))
    assert r[0] == pytest.approx(-0.1)


def test_residual_matches_scalar_form(case33_model):
    # Independent oracle: per-bus scalar power balance sums.
    m = case33_model
    rng = np.random.default_rng(4)
    for _ in range(5):
        v = 1.0 + 0.1 * rand_complex(rng, m.n)
        s = 0.05 * rand_complex(rng, m.n)
        got = pf_residual(m, v, s)
        for i in range(m.n):
            acc = 0.0 + 0.0j
            for k in range(m.n):
                acc += np.conj(m.Y[i, k]) * v[i] * np.conj(v[k] - m.V_zero[k])
            assert abs(got[i] - (acc - s[i])) < 1e-12


def test_residual_zero_voltage_rejected(case2_model):
    with pytest.raises(ValueError, match="zero voltage"):
        pf_residual(case2_model, np.array([0.0 + 0j]), np.array([0.0 + 0j]))


# ------------------------------------------------------------------ newton

def test_newton_zero_injection_converges_immediately(case33_model):
    sol = newton_pf(case33_model, np.zeros(case33_model.n, complex))
    assert sol.converged
    assert sol.iterations <= 1
    assert np.allclose(sol.V, case33_model.V_zero)


def biquadratic_vm(R, X, P, Q):
    """Independent oracle: high-voltage root of the 2-bus biquadratic.

    V^4 + (2(RP+XQ)-1) V^2 + (R^2+X^2)(P^2+Q^2) = 0, P/Q consumed.
    """
    roots = np.roots([1.0, 2.0 * (R * P + X * Q) - 1.0,
                      (R * R + X * X) * (P * P + Q * Q)])
    real = roots[np.abs(roots.imag) < 1e-9].real
    real = real[real > 0]
    return float(np.sqrt(real.max()))


@pytest.mark.parametrize("lam", [0.1, 1.0, 3.0, 4.5])
def test_newton_two_bus_matches_biquadratic(case2_model, lam):
    direction = 0.9 + 0.436j
    sol = newton_pf(case2_model, np.array([-direction * lam]))
    assert sol.converged
    vm_expect = biquadratic_vm(0.03, 0.04, 0.9 * lam, 0.436 * lam)
    assert abs(sol.V[0]) == pytest.approx(vm_expect, abs=1e-7)


def eq14_radius(R, X, p_hat, q_hat):
    """Independent oracle: true 2-bus boundary radius along a consumption ray.

    Solves (RQ-XP)^2 + RP + XQ = 1/4 with P = t p_hat, Q = t q_hat.
    """
    a = (R * q_hat - X * p_hat) ** 2
    b = R * p_hat + X * q_hat
    roots = np.roots([a, b, -0.25]) if a > 0 else np.array([0.25 / b])
    roots = roots[np.isreal(roots)].real if a > 0 else roots
    return float(roots[roots > 0].min()) if a > 0 else float(roots[0])


def test_newton_fails_beyond_true_boundary(case2_model):
    lam_true = eq14_radius(0.03, 0.04, 0.9, 0.436)
    s = np.array([-(0.9 + 0.436j)]) * (1.05 * lam_true)
    sol = newton_pf(case2_model, s, raise_on_fail=False)
    assert not sol.converged
    with pytest.raises(NonConvergenceError) as err:
        newton_pf(case2_model, s)
    assert err.value.solution.final_mismatch > 0


def test_newton_rejects_bad_args(case2_model):
    with pytest.raises(ValueError):
        newton_pf(case2_model, np.zeros(1, complex), tol=0.0)
    with pytest.raises(ValueError):
        newton_pf(case2_model, np.zeros(1, complex),
                  V_init=np.array([0.0 + 0j]))


def test_newton_solution_closes_residual(case33_model):
    m = case33_model
    sol = newton_pf(m, 1.5 * m.s_base, tol=1e-10)
    assert np.max(np.abs(pf_residual(m, sol.V, 1.5 * m.s_base))) <= 1e-10


# ------------------------------------------------------------- fixed point

def test_fixed_point_rhs_zero_at_base(case33_base):
    base = case33_base
    n = base.n
    out = fixed_point_rhs(base, base.s_star, np.zeros(n, complex))
    assert np.max(np.abs(out)) == 0.0


def test_fixed_point_solution_is_fixed(case33_base, case33_model):
    m = case33_model
    rng = np.random.default_rng(5)
    for _ in range(5):
        s = m.s_base * (1.0 + 0.4 * rng.uniform(-1, 1, m.n))
        sol = newton_pf(m, s, tol=1e-12)
        state = fixed_point_state(case33_base, sol.V)
        y_next = fixed_point_rhs(case33_base, s, state.y)
        assert np.max(np.abs(y_next - state.y)) < 1e-9


def test_fixed_point_self_map_on_certified_ball(case33_base, case33_model):
    # Core mechanism: a certified (s, r) makes the map send ||y||<=r into itself.
    m = case33_model
    base = case33_base
    rng = np.random.default_rng(6)
    checked = 0
    for _ in range(20):
        s = m.s_base + 0.015 * rand_complex(rng, m.n)
        r_min = cert.minimal_certified_radius(base, s)
        if r_min is None:
            continue
        r = min(0.9, 2.0 * r_min + 1e-6)
        if not cert.certify_r(base, s, r).passed:
            continue
        for _ in range(30):
            y = rand_complex(rng, m.n)
            y *= rng.uniform(0.0, r) / np.max(np.abs(y))
            y_next = fixed_point_rhs(base, s, y)
            assert np.max(np.abs(y_next)) <= r * (1 + 1e-12)
            checked += 1
    assert checked >= 300


# ------------------------------------------------------------- loadability

def test_loadability_two_bus_matching_direction(case2_model):
    # Matching P/Q = R/X collapses the boundary to RP + XQ = 1/4.
    du = np.array([-(0.6 + 0.8j)])
    lam = loadability_limit(case2_model, np.zeros(1, complex), du,
                            tol_rel=1e-8)
    assert lam == pytest.approx(5.0, rel=1e-6)


@pytest.mark.parametrize("angle_deg", [10.0, 100.0, 200.0, 305.0])
def test_loadability_two_bus_any_direction_matches_eq14(case2_model, angle_deg):
    th = np.deg2rad(angle_deg)
    p_hat, q_hat = np.cos(th), np.sin(th)
    du = np.array([-(p_hat + 1j * q_hat)])
    lam = loadability_limit(case2_model, np.zeros(1, complex), du,
                            tol_rel=1e-7)
    # Oracle radius: smallest positive root along the ray, consumption signed.
    a = (0.03 * q_hat - 0.04 * p_hat) ** 2
    b = 0.03 * p_hat + 0.04 * q_hat
    roots = np.roots([a, b, -0.25])
    roots = roots[np.abs(roots.imag) < 1e-12].real
    lam_true = float(roots[roots > 0].min())
    assert lam == pytest.approx(lam_true, rel=1e-6)


def test_loadability_zero_direction_rejected(case2_model):
    with pytest.raises(ValueError, match="zero loading direction"):
        loadability_limit(case2_model, np.zeros(1, complex),
                          np.zeros(1, complex))
    with pytest.raises(ValueError, match="unit infinity norm"):
        loadability_limit(case2_model, np.zeros(1, complex),
                          np.array([-0.5 + 0j]))


def cold_bisection(model, s_star, du, tol_rel):
    """Cold-start oracle: flat-start Newton only, plain bisection."""
    def ok(lam):
        sol = newton_pf(model, s_star + lam * du, raise_on_fail=False)
        return sol.converged

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, hi * 2.0
    while hi - lo > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def test_warm_and_cold_loadability_agree(case2_model, case33_model):
    from gridcert.boundary import homogeneous_direction
    for m in (case2_model, case33_model):
        du = homogeneous_direction(m, 0.9)
        warm = loadability_limit(m, m.s_base, du, tol_rel=1e-6)
        cold = cold_bisection(m, m.s_base, du, 1e-6)
        assert warm == pytest.approx(cold, rel=2e-6)


def test_continuation_reaches_what_newton_reaches(case33_model):
    m = case33_model
    sol, calls = continuation_solve(m, 2.0 * m.s_base)
    assert sol is not None and calls >= 1
    none_sol, _ = continuation_solve(m, 200.0 * m.s_base)
    assert none_sol is None


def test_newton_envelope_for_certified_injections(case33_base, case33_model):
    # Certified at radius r: the Newton solution from the base profile stays
    # inside the guaranteed magnitude band (anomalies would mean Newton found
    # a different solution than the certified one).
    m = case33_model
    base = case33_base
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(40):
        s = m.s_base + 0.01 * rand_complex(rng, m.n)
        r_min = cert.minimal_certified_radius(base, s)
        if r_min is None or r_min >= 1.0:
            continue
        r = min(0.999, r_min * (1 + 1e-9) + 1e-15)
        if not cert.certify_r(base, s, r).passed:
            continue
        sol = newton_pf(m, s, V_init=base.V_star)
        assert sol.converged
        assert cert.envelope_violations(base, r, sol.V) == []
        checked += 1
    assert checked >= 30
