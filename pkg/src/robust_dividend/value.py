"""Value function assembled from a shooting solution, plus HJB-VI audits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .model import ModelParams, eval_f, eval_H, optimal_kernel
from .shooting import ShootingResult


@dataclass(frozen=True)
class ValueFunction:
    """V on [0, beta] from grid samples, linear with slope 1 beyond beta.

    ``ddv`` holds the ODE right-hand side at the nodes. It is only used by
    the residual audit, which compares interpolated curvature against H.
    """

    params: ModelParams
    beta: float
    xs: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    ddv: np.ndarray
    v_at_beta: float
    c_bar: float
    s_kappa: float = 1.0

    def __call__(self, x):
        return value_at(self, x)[0]


@dataclass(frozen=True)
class ResidualReport:
    max_ode_residual: float
    max_slope_defect: float
    max_vi_violation: float
    pasting_gap: Optional[float]


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def build_value_function(result: ShootingResult) -> ValueFunction:
    params = result.params
    traj = result.trajectory
    if result.beta_kappa == 0.0:
        empty = _frozen([0.0])
        return ValueFunction(
            params=params, beta=0.0, xs=empty, v=empty, dv=_frozen([1.0]),
            ddv=_frozen([0.0]), v_at_beta=0.0, c_bar=1.0, s_kappa=1.0,
        )
    xs, v, dv = traj.xs, traj.phi, traj.dphi
    ddv = -eval_H(params, xs, v, dv)
    return ValueFunction(
        params=params,
        beta=float(result.beta_kappa),
        xs=_frozen(xs),
        v=_frozen(v),
        dv=_frozen(dv),
        ddv=_frozen(ddv),
        v_at_beta=float(v[-1]),
        c_bar=float(np.max(dv)),
        s_kappa=float(result.s_kappa),
    )


def _hermite(xs, f, df, x):
    """Cubic Hermite value and derivative; exact reproduction at left nodes."""
    idx = np.searchsorted(xs, x, side="right") - 1
    idx = np.clip(idx, 0, len(xs) - 2)
    x0, x1 = xs[idx], xs[idx + 1]
    h = x1 - x0
    t = (x - x0) / h
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    val = h00 * f[idx] + h10 * h * df[idx] + h01 * f[idx + 1] + h11 * h * df[idx + 1]
    d00 = (6 * t2 - 6 * t) / h
    d10 = 3 * t2 - 4 * t + 1
    d01 = (-6 * t2 + 6 * t) / h
    d11 = 3 * t2 - 2 * t
    der = d00 * f[idx] + d10 * df[idx] + d01 * f[idx + 1] + d11 * df[idx + 1]
    exact = t == 0.0
    val = np.where(exact, f[idx], val)
    der = np.where(exact, df[idx], der)
    at_end = x == xs[-1]
    val = np.where(at_end, f[-1], val)
    der = np.where(at_end, df[-1], der)
    return val, der


def _interior(vf: ValueFunction, x):
    return _hermite(vf.xs, vf.v, vf.dv, x)


def value_at(vf: ValueFunction, x):
    """Return ``(V, V', V'')`` at ``x`` (scalar or array).

    On the ODE branch V'' is evaluated as ``-H(x, V, V')``.
    """
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0) or np.any(np.isnan(xx)):
        raise ValidationError("surplus must be >= 0")
    scalar = xx.ndim == 0
    xx = np.atleast_1d(xx)
    V = (xx - vf.beta) + vf.v_at_beta
    dV = np.ones_like(xx)
    ddV = np.zeros_like(xx)
    inner = xx <= vf.beta
    if vf.beta > 0.0 and np.any(inner):
        xi = xx[inner]
        vi, dvi = _interior(vf, xi)
        V[inner] = vi
        dV[inner] = dvi
        ddV[inner] = -eval_H(vf.params, xi, vi, dvi)
    if scalar:
        return float(V[0]), float(dV[0]), float(ddV[0])
    return V, dV, ddV


def default_audit_extent(vf: ValueFunction) -> float:
    p = vf.params
    return vf.beta + 3.0 * max(1.0, p.m / p.rho)


def hjb_residual(vf: ValueFunction, n_check: int = 2001, x_max_check: Optional[float] = None) -> ResidualReport:
    """Audit both branches of the variational inequality on a uniform grid.

    On [0, beta] the curvature is taken from the Hermite interpolant of the
    slope samples (with node curvatures as derivative data), so a value
    function whose V samples disagree with its slopes shows up here.
    """
    if n_check < 2:
        raise ValidationError("n_check must be >= 2")
    p = vf.params
    x_top = default_audit_extent(vf) if x_max_check is None else float(x_max_check)
    grid = np.linspace(0.0, x_top, int(n_check))

    ode_res = 0.0
    slope_defect = 0.0
    if vf.beta > 0.0:
        inner = grid[grid <= vf.beta]
        inner = np.union1d(inner, [vf.beta])
        V, dV = _interior(vf, inner)
        _, ddV = _hermite(vf.xs, vf.dv, vf.ddv, inner)
        ode_res = float(np.max(np.abs(ddV + eval_H(p, inner, V, dV))))
        slope_defect = float(np.max(np.maximum(1.0 - dV, 0.0)))

    outer = grid[grid > vf.beta]
    vi = 0.0
    if outer.size:
        V_out = (outer - vf.beta) + vf.v_at_beta
        vi = float(np.max(np.maximum(eval_H(p, outer, V_out, 1.0), 0.0)))

    gap = None
    if vf.beta > 0.0:
        gap = abs(p.rho * vf.v_at_beta - eval_f(p.reward, vf.beta) - (p.m - 0.5 * p.sigma**2 * p.kappa))
    return ResidualReport(ode_res, slope_defect, vi, gap)


def kernel_profile(vf: ValueFunction, xs) -> np.ndarray:
    """Adverse kernel -kappa sigma V'(x) along ``xs``."""
    _, dV, _ = value_at(vf, np.atleast_1d(np.asarray(xs, dtype=float)))
    return optimal_kernel(vf.params, dV)
