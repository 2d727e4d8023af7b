from dataclasses import replace

import numpy as np
import pytest

from robust_dividend import (
    ModelParams, RewardFunction, ValidationError, build_value_function, eval_H, hjb_residual,
    kernel_profile, solve_shooting, value_at,
)

P0_S = 1.5378862996792615
P0_BETA = 1.72163576385605


def _vf(kappa, reward=None):
    p = ModelParams(1.0, 2.0, 0.5, kappa, reward or RewardFunction.zero())
    return build_value_function(solve_shooting(p))


def test_p0_boundary_values(p0_vf):
    assert p0_vf(0.0) == 0.0
    assert p0_vf.v_at_beta == pytest.approx(2.0, abs=1e-9)
    assert p0_vf.beta == pytest.approx(P0_BETA, abs=1e-8)


def test_value_at_examples(p0_vf):
    V, dV, ddV = value_at(p0_vf, 3.0)
    assert V == pytest.approx(3.0 - P0_BETA + 2.0, abs=1e-8)
    assert (dV, ddV) == (1.0, 0.0)
    V, dV, ddV = value_at(p0_vf, 0.0)
    assert V == 0.0 and dV == pytest.approx(P0_S, abs=1e-9)
    assert ddV == pytest.approx(-0.5 * P0_S, abs=1e-9)
    V, dV, ddV = value_at(p0_vf, p0_vf.beta)
    assert V == pytest.approx(2.0, abs=1e-9)
    assert dV == pytest.approx(1.0, abs=1e-9)
    assert ddV == pytest.approx(0.0, abs=1e-9)


def test_value_at_rejects_negative(p0_vf):
    with pytest.raises(ValidationError):
        value_at(p0_vf, -1e-3)


def test_nodes_reproduced_bitwise(amb_vf):
    V, dV, _ = value_at(amb_vf, amb_vf.xs)
    assert np.array_equal(V, amb_vf.v)
    assert np.array_equal(dV, amb_vf.dv)


def test_vf_arrays_immutable(p0_vf):
    with pytest.raises(ValueError):
        p0_vf.v[1] = 0.0


def test_grid_invariants(amb_vf):
    assert amb_vf.v[0] == 0.0
    assert np.all(amb_vf.dv >= 1.0 - 1e-9)
    assert abs(amb_vf.dv[-1] - 1.0) <= 1e-9
    assert np.all(np.diff(amb_vf.v) > 0)
    h = np.diff(amb_vf.xs)
    second = np.diff(amb_vf.dv) / h
    assert np.all(second <= 1e-6)
    assert amb_vf.c_bar == pytest.approx(amb_vf.s_kappa)


def test_linear_branch(amb_vf):
    x1, x2 = amb_vf.beta + 0.5, amb_vf.beta + 2.25
    V1, V2 = amb_vf(x1), amb_vf(x2)
    assert V1 == (x1 - amb_vf.beta) + amb_vf.v_at_beta
    # equal to x2 - x1 up to rounding of the two affine evaluations
    assert abs((V2 - V1) - (x2 - x1)) <= 4 * np.spacing(V2)


@pytest.mark.parametrize("kappa", [0.5, 0.7, 2.0])
def test_saturated_value_is_identity(kappa):
    vf = _vf(kappa)
    assert vf.beta == 0.0
    xs = np.linspace(0.0, 10.0, 1001)
    assert np.array_equal(vf(xs), xs)
    assert vf(2.0) == 2.0


def test_saturated_residuals():
    rep = hjb_residual(_vf(0.7))
    assert rep.max_vi_violation == 0.0 and rep.max_ode_residual == 0.0
    assert rep.pasting_gap is None


def test_p0_residuals(p0_vf):
    rep = hjb_residual(p0_vf, n_check=2001, x_max_check=4.0)
    assert rep.max_ode_residual <= 1e-6
    assert rep.max_vi_violation <= 1e-9
    assert rep.pasting_gap <= 1e-6
    assert rep.max_slope_defect <= 1e-9


def test_corrupted_value_detected(p0_vf):
    bad = replace(p0_vf, v=p0_vf.v * 1.01)
    assert hjb_residual(bad).max_ode_residual >= 1e-3


@pytest.mark.parametrize("kappa", [0.0, 0.1, 0.25, 0.49])
@pytest.mark.parametrize("reward", [RewardFunction.zero(), RewardFunction.linear(0.3)])
def test_concavity_and_slopes(kappa, reward):
    vf = _vf(kappa, reward)
    xs = np.linspace(0.0, vf.beta + 3.0, 3001)
    _, dV, ddV = value_at(vf, xs)
    assert np.all(dV >= 1 - 1e-9)
    assert np.all(ddV <= 1e-8)
    # the interior curvature matches the ODE identity
    inner = xs <= vf.beta
    V = vf(xs[inner])
    assert np.allclose(ddV[inner], -eval_H(vf.params, xs[inner], V, dV[inner]), rtol=0, atol=1e-15)


def test_kernel_profile(amb_vf, p0_vf):
    assert np.all(kernel_profile(p0_vf, np.linspace(0, 5, 11)) == 0.0)
    vf = _vf(0.2)
    above = kernel_profile(vf, vf.beta + np.array([0.0, 0.5, 3.0]))
    assert np.allclose(above, -0.4, rtol=0, atol=1e-9)
    xi = kernel_profile(amb_vf, np.linspace(0, 6, 601))
    k, s = amb_vf.params.kappa, amb_vf.params.sigma
    assert np.all(np.abs(xi) <= k * s * amb_vf.c_bar + 1e-12)
    assert np.all(xi <= -k * s + 1e-9)
