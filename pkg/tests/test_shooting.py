import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_dividend import (
    TOO_LARGE, ConvergenceError, IntegrationConfig, ModelParams, MollifierCap, RewardFunction,
    ShootingCase, Terminal, ValidationError, eval_H, eval_H_F, integrate_cauchy,
    pasting_residual, solve_shooting,
)

# independent scipy oracle (solve_ivp rtol 1e-13 + brentq on the closed-form root), frozen
P0_S = 1.5378862996792615
P0_BETA = 1.72163576385605
S_BELOW = 1.53780
S_BELOW_BETA = 1.7004847361255957
S_BELOW_PHI = 1.9787375323437921
S_BELOW_G = -0.005315616914051968


def test_p0_solve_matches_oracle(p0_result):
    assert p0_result.case is ShootingCase.INTERIOR
    assert p0_result.s_kappa == pytest.approx(P0_S, abs=1e-9)
    assert p0_result.beta_kappa == pytest.approx(P0_BETA, abs=1e-8)
    assert abs(p0_result.pasting_residual_final) <= 1e-8


def test_p0_trajectory_invariants(p0, p0_result):
    tr = p0_result.trajectory
    assert tr.phi[0] == 0.0 and tr.dphi[0] == tr.s == p0_result.s_kappa
    assert np.all(np.diff(tr.xs) > 0)
    assert np.all(tr.dphi >= 1.0 - 1e-12)
    assert abs(tr.dphi_at_beta - 1.0) <= 1e-9
    assert tr.xs[-1] == tr.beta == p0_result.beta_kappa
    assert tr.phi_at_beta == pytest.approx(p0.m / p0.rho, abs=1e-9)


def test_trajectory_arrays_read_only(p0_result):
    with pytest.raises(ValueError):
        p0_result.trajectory.phi[0] = 1.0


def test_crossing_below_root(p0):
    tr = integrate_cauchy(p0, MollifierCap.default(p0), S_BELOW)
    assert tr.terminal is Terminal.CROSSING
    assert tr.beta == pytest.approx(S_BELOW_BETA, abs=1e-8)
    assert tr.phi_at_beta == pytest.approx(S_BELOW_PHI, abs=1e-8)
    assert tr.ddphi_at_beta == pytest.approx(S_BELOW_G, abs=1e-9)
    assert tr.ddphi_at_beta == -eval_H(p0, tr.beta, tr.phi_at_beta, 1.0)


def test_unit_slope_exits_immediately(p0):
    tr = integrate_cauchy(p0, MollifierCap.default(p0), 1.0)
    assert tr.terminal is Terminal.IMMEDIATE
    assert tr.beta == 0.0
    assert pasting_residual(p0, MollifierCap.default(p0), 1.0) == pytest.approx(-0.5, abs=1e-15)


def test_critical_kappa_unit_slope():
    p = ModelParams(1.0, 2.0, 0.5, kappa=0.5)
    tr = integrate_cauchy(p, MollifierCap(3.0), 1.0)
    assert tr.beta == 0.0 and tr.ddphi_at_beta == 0.0


def test_large_slope_too_large_or_positive(p0):
    g = pasting_residual(p0, MollifierCap.default(p0), 10.0)
    assert g is TOO_LARGE or g > 0


def test_residual_sign_below_root(p0):
    assert pasting_residual(p0, MollifierCap.default(p0), S_BELOW) < 0


def test_residual_vanishes_at_root(p0, p0_result):
    g = pasting_residual(p0, MollifierCap.default(p0), p0_result.s_kappa)
    assert g is TOO_LARGE or abs(g) <= 1e-6


def test_not_found_is_too_large():
    p = ModelParams(1.0, 2.0, 0.5)
    cfg = IntegrationConfig(x_max=0.5)
    assert integrate_cauchy(p, MollifierCap.default(p), 3.0, cfg).terminal is Terminal.HORIZON
    assert pasting_residual(p, MollifierCap.default(p), 3.0, cfg) is TOO_LARGE


@pytest.mark.parametrize("kappa", [0.5, 0.7, 2.0])
def test_saturated_cases(kappa):
    r = solve_shooting(ModelParams(1.0, 2.0, 0.5, kappa))
    assert r.case is ShootingCase.SATURATED
    assert (r.s_kappa, r.beta_kappa) == (1.0, 0.0)


def test_interior_pasting_identity():
    r = solve_shooting(ModelParams(1.0, 2.0, 0.5, 0.2))
    assert r.case is ShootingCase.INTERIOR
    assert 0 < r.beta_kappa <= 2.0
    assert r.trajectory.phi_at_beta == pytest.approx(1.2, abs=1e-5)


def test_mollifier_inactive_on_solution():
    p = ModelParams(1.0, 2.0, 0.5, 0.3, RewardFunction.linear(0.2))
    cap = MollifierCap.default(p)
    r = solve_shooting(p, cap)
    tr = r.trajectory
    assert np.all(tr.dphi <= cap.cap) and np.all(tr.dphi >= 1.0 - 1e-12)
    assert np.array_equal(eval_H(p, tr.xs, tr.phi, tr.dphi), eval_H_F(p, cap, tr.xs, tr.phi, tr.dphi))


def test_rejects_slope_below_one(p0):
    with pytest.raises(ValidationError):
        integrate_cauchy(p0, MollifierCap.default(p0), 0.99)


@pytest.mark.parametrize("kwargs", [dict(step=0.0), dict(x_max=-1.0), dict(step=2.0, x_max=1.0),
                                    dict(event_tol=1e-3, step=1e-4), dict(output_stride=0)])
def test_integration_config_validation(kwargs):
    with pytest.raises(ValidationError):
        IntegrationConfig(**kwargs)


def test_coarse_step_fails_residual_check(p0):
    # the residual target cannot be met once the bracket collapses
    with pytest.raises(ConvergenceError) as info:
        solve_shooting(p0, residual_tol=1e-30)
    assert info.value.diagnostics


@pytest.mark.parametrize("params", [
    ModelParams(1.0, 2.0, 0.5),
    ModelParams(1.0, 2.0, 0.5, 0.2, RewardFunction.linear(0.3)),
    ModelParams(1.0, 2.0, 0.5, 0.1, RewardFunction.saturating(0.3, 1.0)),
])
def test_grid_refinement_is_fourth_order(params):
    steps = [0.08, 0.04, 0.02, 0.01]
    sols = np.array([
        (r.s_kappa, r.beta_kappa)
        for r in (solve_shooting(params, cfg=IntegrationConfig(step=h, output_stride=1)) for h in steps)
    ])
    diffs = np.abs(np.diff(sols, axis=0))
    ratios = diffs[1:] / diffs[:-1]
    assert np.all((ratios >= 1 / 32) & (ratios <= 1 / 2)), ratios


_params = st.builds(
    lambda m, s, rho, kfrac, afrac, kind, extra: ModelParams(
        m, s, rho, kfrac * 2 * m / s**2,
        [RewardFunction.zero(), RewardFunction.linear(afrac * rho),
         RewardFunction.capped(afrac * rho, extra), RewardFunction.saturating(afrac * rho, extra)][kind],
    ),
    st.floats(0.5, 2.0), st.floats(1.0, 3.0), st.floats(0.2, 1.0), st.floats(0.0, 1.3),
    st.floats(0.0, 0.8), st.integers(0, 3), st.floats(0.2, 3.0),
)


@given(_params)
@settings(max_examples=25, deadline=None)
def test_solution_bounds(p):
    r = solve_shooting(p)
    assert 1.0 <= r.s_kappa <= 1.0 + p.slope_bound
    assert r.s_kappa <= p.slope_bound + 1e-6
    assert r.beta_kappa <= p.threshold_bound + 1e-6
    if r.case is ShootingCase.INTERIOR:
        assert r.beta_kappa > 0 and abs(r.pasting_residual_final) <= 1e-8
    else:
        assert p.is_saturated and (r.s_kappa, r.beta_kappa) == (1.0, 0.0)


@given(_params.filter(lambda p: not p.is_saturated), st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_shooting_map_sign_pattern(p, u):
    # below the root the slope crosses 1 with negative curvature; above it does not
    r = solve_shooting(p)
    cap = MollifierCap.default(p)
    lo = 1.0 + u * (r.s_kappa - 1.0) * 0.999
    hi = r.s_kappa + u * (1.0 + p.slope_bound - r.s_kappa) + 1e-6
    assert pasting_residual(p, cap, lo) < 0
    g = pasting_residual(p, cap, hi)
    assert g is TOO_LARGE or g >= 0


def test_extreme_bracket_converges():
    # slope bound exp(40): the bracket spans 17 decades
    p = ModelParams(2.0, 1.0, 0.2)
    r = solve_shooting(p)
    assert r.case is ShootingCase.INTERIOR and abs(r.pasting_residual_final) <= 1e-8
    assert r.beta_kappa <= p.threshold_bound
