import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from robust_dividend import (
    ModelParams, RewardFunction, ValidationError, ValueFunction, characteristic_roots,
    closed_form_barrier, closed_form_solution, closed_form_value, hjb_residual, solve_shooting,
)
from robust_dividend.baseline import quadratic_roots

# frozen from the formulas here and cross-checked by solve_ivp integration of the linear ODE
P0_BETA = 1.7216357638560162
P0_S0 = 1.5378862996792797
P0_C = 1.375527323099393
P0_V1 = 1.2610696104868


def test_p0_roots(p0):
    r1, r2 = characteristic_roots(p0)
    assert r1 == pytest.approx((math.sqrt(5) - 1) / 4, abs=1e-15)
    assert r2 == pytest.approx(-(math.sqrt(5) + 1) / 4, abs=1e-15)


def test_symmetric_roots_at_zero_drift():
    r1, r2 = quadratic_roots(0.0, 1.0, 0.5)
    assert (r1, r2) == pytest.approx((1.0, -1.0), abs=1e-15)


def test_sqrt2_roots_and_barrier():
    p = ModelParams(1.0, math.sqrt(2.0), 0.5)
    r1, r2 = characteristic_roots(p)
    assert r1 == pytest.approx((math.sqrt(3) - 1) / 2, abs=1e-12)
    assert r2 == pytest.approx(-(math.sqrt(3) + 1) / 2, abs=1e-12)
    assert closed_form_barrier(p) == pytest.approx(2 * math.log(r2 / -r1) / math.sqrt(3), abs=1e-12)
    assert closed_form_barrier(p) == pytest.approx(1.520690, abs=1e-5)


def test_p0_constants(p0):
    sol = closed_form_solution(p0)
    assert sol.beta_star == pytest.approx(P0_BETA, abs=1e-13)
    assert sol.C == pytest.approx(P0_C, abs=1e-13)
    assert sol.initial_slope == pytest.approx(P0_S0, abs=1e-13)
    assert sol.beta_star <= p0.m / p0.rho


def test_closed_form_values(p0):
    sol = closed_form_solution(p0)
    assert closed_form_value(sol, 0.0) == pytest.approx((0.0, P0_S0), abs=1e-14)
    V, dV = closed_form_value(sol, sol.beta_star)
    assert V == pytest.approx(2.0, abs=1e-12) and dV == pytest.approx(1.0, abs=1e-12)
    assert closed_form_value(sol, 1.0)[0] == pytest.approx(P0_V1, abs=1e-12)
    V, dV = closed_form_value(sol, np.array([3.0, 5.0]))
    assert np.allclose(V, [3.0 - P0_BETA + 2.0, 5.0 - P0_BETA + 2.0]) and np.all(dV == 1.0)


def test_numerical_ode_confirms_pasting(p0):
    sol = closed_form_solution(p0)
    s2 = p0.sigma**2

    def rhs(x, u):
        return [u[1], -(2 / s2) * (p0.m * u[1] - p0.rho * u[0])]

    r = solve_ivp(rhs, [0, sol.beta_star], [0.0, sol.initial_slope], rtol=1e-13, atol=1e-14)
    phi, dphi = r.y[:, -1]
    assert dphi == pytest.approx(1.0, abs=1e-10)
    assert -(2 / s2) * (p0.m * dphi - p0.rho * phi) == pytest.approx(0.0, abs=1e-10)


def test_requires_risk_neutral_zero_reward():
    with pytest.raises(ValidationError):
        closed_form_solution(ModelParams(1.0, 2.0, 0.5, 0.1))
    with pytest.raises(ValidationError):
        closed_form_solution(ModelParams(1.0, 2.0, 0.5, reward=RewardFunction.linear(0.1)))


def _random_triples(n, seed):
    rng = np.random.default_rng(seed)
    return [ModelParams(rng.uniform(0.5, 2), rng.uniform(1, 3), rng.uniform(0.2, 1)) for _ in range(n)]


@pytest.mark.parametrize("p", _random_triples(8, 11))
def test_closed_form_invariants(p):
    sol = closed_form_solution(p)
    for r in (sol.r1, sol.r2):
        assert abs(0.5 * p.sigma**2 * r * r + p.m * r - p.rho) <= 1e-12
    assert sol.r1 > 0 > sol.r2 and sol.beta_star > 0 and sol.C > 0
    assert closed_form_value(sol, sol.beta_star)[0] == pytest.approx(p.m / p.rho, abs=1e-10)


@pytest.mark.parametrize("p", _random_triples(6, 5))
def test_shooting_agrees_with_closed_form(p):
    sol = closed_form_solution(p)
    r = solve_shooting(p)
    assert abs(r.beta_kappa - sol.beta_star) <= 1e-4
    assert abs(r.s_kappa - sol.initial_slope) <= 1e-4


def test_closed_form_passes_residual_audit(p0):
    sol = closed_form_solution(p0)
    xs = np.linspace(0.0, sol.beta_star, 4001)
    v, dv = closed_form_value(sol, xs)
    ddv = sol.C * (sol.r1**2 * np.exp(sol.r1 * xs) - sol.r2**2 * np.exp(sol.r2 * xs))
    vf = ValueFunction(p0, sol.beta_star, xs, v, dv, ddv, float(v[-1]), float(dv.max()), float(dv[0]))
    rep = hjb_residual(vf, n_check=20001)
    assert rep.max_ode_residual <= 1e-10
    assert rep.max_vi_violation <= 1e-12
