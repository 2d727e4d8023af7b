"""Shooting on the initial slope of the Cauchy problem.

For each trial slope ``s >= 1`` the second-order ODE

    phi'' + H_F(x, phi, phi') = 0,   phi(0) = 0,   phi'(0) = s

is integrated with fixed-step RK4. The slope ``phi'`` starts at ``s`` and,
for slopes below the root, falls through 1 at a point ``beta(s)`` where the
curvature is negative. For slopes above the root it reaches a local minimum
while still above 1. Any critical point of ``phi'`` with ``phi' >= 1`` is a
strict minimum, because there ``phi''' = (2/sigma^2)(rho phi' - f') > 0``. So
once such a minimum is seen the slope never comes back down to 1, and the
trial is certified "too large" without integrating to the horizon.

Near the root the curvature at the crossing behaves like ``-sqrt(s_root - s)``.
Bisection on its sign localizes ``s`` well, but the crossing curvature itself
converges slowly. The solve therefore takes the free boundary from the
upper end of the final bracket, at the slope minimum, where ``phi' = 1 + O(ds)``
and ``phi'' = 0`` up to the event tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConvergenceError, NumericalBlowupError, ValidationError
from .model import ModelParams, MollifierCap, _hamiltonian, _mollify, eval_H

TOO_LARGE = math.inf
"""Pasting residual reported when the slope never returns to 1."""

_CROSSING, _TANGENCY, _HORIZON, _BLOWUP, _IMMEDIATE = range(5)


class Terminal(enum.Enum):
    CROSSING = "crossing"
    """phi' fell through 1; beta is the crossing point."""
    IMMEDIATE = "immediate"
    """s = 1 and phi''(0) <= 0: beta = 0."""
    TANGENCY = "tangency"
    """phi' reached a local minimum above 1; no crossing will follow."""
    HORIZON = "horizon"
    """x_max reached without crossing."""


_TERMINALS = {
    _CROSSING: Terminal.CROSSING,
    _TANGENCY: Terminal.TANGENCY,
    _HORIZON: Terminal.HORIZON,
    _IMMEDIATE: Terminal.IMMEDIATE,
}


class ShootingCase(enum.Enum):
    SATURATED = "saturated"  # 2m <= sigma^2 kappa
    INTERIOR = "interior"  # 2m > sigma^2 kappa


@dataclass(frozen=True)
class IntegrationConfig:
    """RK4 settings. ``x_max=None`` means ``m / delta + 1`` for the model at hand."""

    x_max: Optional[float] = None
    step: float = 1e-4
    event_tol: float = 1e-12
    output_stride: int = 10

    def __post_init__(self):
        if self.x_max is not None and not self.x_max > 0:
            raise ValidationError("x_max must be > 0")
        if not self.step > 0:
            raise ValidationError("step must be > 0")
        if not self.event_tol > 0:
            raise ValidationError("event_tol must be > 0")
        if self.event_tol >= self.step:
            raise ValidationError("event_tol must be smaller than step")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValidationError("output_stride must be a positive integer")
        if self.x_max is not None and self.step >= self.x_max:
            raise ValidationError("step must be smaller than x_max")

    def horizon(self, params: ModelParams) -> float:
        x_max = params.threshold_bound + 1.0 if self.x_max is None else float(self.x_max)
        if self.step >= x_max:
            raise ValidationError("step must be smaller than x_max")
        return x_max


@dataclass(frozen=True)
class CauchyTrajectory:
    """Solution of the Cauchy problem for one initial slope.

    ``beta`` is None when no crossing of ``phi' = 1`` was found. The arrays
    run from 0 to the terminal point (crossing, slope minimum or horizon),
    thinned by ``output_stride`` with the terminal point always kept.
    """

    s: float
    xs: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    terminal: Terminal
    beta: Optional[float] = None
    phi_at_beta: Optional[float] = None
    dphi_at_beta: Optional[float] = None
    ddphi_at_beta: Optional[float] = None

    @property
    def found(self) -> bool:
        return self.beta is not None

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])


@dataclass(frozen=True)
class ShootingResult:
    s_kappa: float
    beta_kappa: float
    trajectory: CauchyTrajectory
    case: ShootingCase
    pasting_residual_final: float
    bisection_iters: int
    params: ModelParams


@njit(cache=True, nogil=True)
def _rhs(x, y, z, m, sigma, rho, kappa, kind, a, cap_level, b, cap):
    return -_hamiltonian(x, y, _mollify(z, cap), m, sigma, rho, kappa, kind, a, cap_level, b)


@njit(cache=True, nogil=True)
def _rk4(x, y, z, h, m, sigma, rho, kappa, kind, a, cap_level, b, cap):
    k1y = z
    k1z = _rhs(x, y, z, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
    k2y = z + 0.5 * h * k1z
    k2z = _rhs(x + 0.5 * h, y + 0.5 * h * k1y, k2y, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
    k3y = z + 0.5 * h * k2z
    k3z = _rhs(x + 0.5 * h, y + 0.5 * h * k2y, k3y, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
    k4y = z + h * k3z
    k4z = _rhs(x + h, y + h * k3y, k4y, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
    y1 = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    z1 = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return y1, z1


@njit(cache=True, nogil=True)
def _integrate(s, m, sigma, rho, kappa, kind, a, cap_level, b, cap,
               step, x_max, event_tol, stride, xs, ys, zs):
    """Returns (status, n_stored). Buffers hold the trajectory incl. terminal point."""
    x = 0.0
    y = 0.0
    z = s
    xs[0] = 0.0
    ys[0] = 0.0
    zs[0] = s
    n = 1
    zp = _rhs(0.0, 0.0, s, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
    if s <= 1.0 and zp <= 0.0:
        return _IMMEDIATE, n
    if zp >= 0.0:
        return _TANGENCY, n
    i = 0
    while True:
        if x >= x_max:
            return _HORIZON, n
        h = step
        if x + h > x_max:
            h = x_max - x
        y1, z1 = _rk4(x, y, z, h, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
        if not (math.isfinite(y1) and math.isfinite(z1)):
            return _BLOWUP, n
        zp1 = _rhs(x + h, y1, z1, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
        status = -1
        t_hi = h
        if z1 <= 1.0:
            status = _CROSSING
        elif zp1 >= 0.0:
            # slope minimum inside the step; locate where phi'' changes sign
            lo = 0.0
            hi = h
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                ym, zm = _rk4(x, y, z, mid, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
                if _rhs(x + mid, ym, zm, m, sigma, rho, kappa, kind, a, cap_level, b, cap) >= 0.0:
                    hi = mid
                else:
                    lo = mid
            t_hi = hi
            ym, zm = _rk4(x, y, z, hi, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
            if zm <= 1.0:
                status = _CROSSING  # dipped below 1 and came back within the step
            else:
                status = _TANGENCY
                y1 = ym
                z1 = zm
        if status == _CROSSING:
            lo = 0.0
            hi = t_hi
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                ym, zm = _rk4(x, y, z, mid, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
                if zm <= 1.0:
                    hi = mid
                else:
                    lo = mid
            t_hi = hi
            y1, z1 = _rk4(x, y, z, hi, m, sigma, rho, kappa, kind, a, cap_level, b, cap)
        if status >= 0:
            xs[n] = x + t_hi
            ys[n] = y1
            zs[n] = z1
            return status, n + 1
        i += 1
        x_new = i * step
        x = x_new if x_new < x_max else x_max
        y = y1
        z = z1
        if i % stride == 0:
            xs[n] = x
            ys[n] = y
            zs[n] = z
            n += 1


def _default_cap(params: ModelParams, cap: Optional[MollifierCap]) -> MollifierCap:
    return MollifierCap.default(params) if cap is None else cap


def integrate_cauchy(
    params: ModelParams,
    cap: Optional[MollifierCap],
    s: float,
    cfg: Optional[IntegrationConfig] = None,
) -> CauchyTrajectory:
    """Integrate the Cauchy problem with initial slope ``s`` and locate ``beta(s)``.

    Raises:
        ValidationError: if ``s < 1``.
        NumericalBlowupError: if the state becomes non-finite.
    """
    if not s >= 1.0:
        raise ValidationError(f"initial slope must be >= 1, got {s}")
    cfg = cfg or IntegrationConfig()
    cap = _default_cap(params, cap)
    x_max = cfg.horizon(params)
    stride = int(cfg.output_stride)
    size = int(math.ceil(x_max / cfg.step)) // stride + 4
    xs = np.empty(size)
    ys = np.empty(size)
    zs = np.empty(size)
    status, n = _integrate(
        float(s), *params.coefficients(), cap.cap,
        float(cfg.step), float(x_max), float(cfg.event_tol), stride, xs, ys, zs,
    )
    if status == _BLOWUP:
        raise NumericalBlowupError(f"non-finite state while integrating s={s}", s=s)
    xs, ys, zs = xs[:n].copy(), ys[:n].copy(), zs[:n].copy()
    for arr in (xs, ys, zs):
        arr.flags.writeable = False
    terminal = _TERMINALS[status]
    if terminal in (Terminal.CROSSING, Terminal.IMMEDIATE):
        beta, y_b = float(xs[-1]), float(ys[-1])
        return CauchyTrajectory(
            s=float(s), xs=xs, phi=ys, dphi=zs, terminal=terminal,
            beta=beta, phi_at_beta=y_b, dphi_at_beta=float(zs[-1]),
            ddphi_at_beta=-eval_H(params, beta, y_b, 1.0),
        )
    return CauchyTrajectory(s=float(s), xs=xs, phi=ys, dphi=zs, terminal=terminal)


def pasting_residual(params, cap, s, cfg=None) -> float:
    """Curvature ``phi''(beta(s))`` at the crossing, or ``TOO_LARGE`` without one."""
    traj = integrate_cauchy(params, cap, s, cfg)
    return traj.ddphi_at_beta if traj.found else TOO_LARGE


def _tangency_residual(params: ModelParams, traj: CauchyTrajectory) -> float:
    return -eval_H(params, traj.x_end, float(traj.phi[-1]), 1.0)


def _as_boundary(params: ModelParams, traj: CauchyTrajectory) -> CauchyTrajectory:
    """Re-label a tangency trajectory so that its slope minimum is the free boundary."""
    x_b, y_b = traj.x_end, float(traj.phi[-1])
    return CauchyTrajectory(
        s=traj.s, xs=traj.xs, phi=traj.phi, dphi=traj.dphi, terminal=traj.terminal,
        beta=x_b, phi_at_beta=y_b, dphi_at_beta=float(traj.dphi[-1]),
        ddphi_at_beta=-eval_H(params, x_b, y_b, 1.0),
    )


def _saturated_result(params: ModelParams) -> ShootingResult:
    xs = np.zeros(1)
    phi = np.zeros(1)
    dphi = np.ones(1)
    for arr in (xs, phi, dphi):
        arr.flags.writeable = False
    dd0 = -eval_H(params, 0.0, 0.0, 1.0)
    traj = CauchyTrajectory(
        s=1.0, xs=xs, phi=phi, dphi=dphi, terminal=Terminal.IMMEDIATE,
        beta=0.0, phi_at_beta=0.0, dphi_at_beta=1.0, ddphi_at_beta=dd0,
    )
    return ShootingResult(1.0, 0.0, traj, ShootingCase.SATURATED, dd0, 0, params)


def solve_shooting(
    params: ModelParams,
    cap: Optional[MollifierCap] = None,
    cfg: Optional[IntegrationConfig] = None,
    residual_tol: float = 1e-8,
    bracket_tol: float = 1e-10,
) -> ShootingResult:
    """Find the initial slope whose trajectory pastes smoothly onto slope 1.

    For ``2m <= sigma^2 kappa`` the answer is ``(s, beta) = (1, 0)``. Otherwise
    the slope is bisected over ``[1, 1 + exp(2m^2/(sigma^2 delta))]``.

    Raises:
        ConvergenceError: if the bracket ends do not have opposite signs, or
            the pasting residual exceeds ``residual_tol`` once the bracket has
            collapsed (usually a too coarse ``cfg.step``).
    """
    if params.is_saturated:
        return _saturated_result(params)
    cfg = cfg or IntegrationConfig()
    cap = _default_cap(params, cap)

    lo, hi = 1.0, 1.0 + params.slope_bound
    lo_traj = integrate_cauchy(params, cap, lo, cfg)
    hi_traj = integrate_cauchy(params, cap, hi, cfg)
    g_lo = lo_traj.ddphi_at_beta if lo_traj.found else TOO_LARGE
    g_hi = hi_traj.ddphi_at_beta if hi_traj.found else TOO_LARGE
    if not (g_lo < 0.0 and g_hi > 0.0):
        raise ConvergenceError(
            "shooting bracket is not single-signed", lo=lo, hi=hi, g_lo=g_lo, g_hi=g_hi,
        )

    iters = 0
    tie = None
    while hi - lo > bracket_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        iters += 1
        traj = integrate_cauchy(params, cap, mid, cfg)
        g = traj.ddphi_at_beta if traj.found else TOO_LARGE
        if g < 0.0:
            lo, lo_traj = mid, traj
        elif g == 0.0:
            tie = traj
            break
        else:
            hi, hi_traj = mid, traj

    candidates = []
    if tie is not None:
        candidates.append(tie)
    else:
        if hi_traj.terminal is Terminal.TANGENCY and hi_traj.x_end > 0.0:
            candidates.append(_as_boundary(params, hi_traj))
        if lo_traj.found and lo_traj.beta > 0.0:
            candidates.append(lo_traj)
    if not candidates:
        raise ConvergenceError("no usable trajectory at bracket collapse", lo=lo, hi=hi)
    best = min(candidates, key=lambda t: abs(t.ddphi_at_beta))
    if not abs(best.ddphi_at_beta) <= residual_tol:
        raise ConvergenceError(
            f"pasting residual {best.ddphi_at_beta:.3e} exceeds {residual_tol:.1e}",
            lo=lo, hi=hi, residual=best.ddphi_at_beta, iters=iters, step=cfg.step,
        )
    return ShootingResult(
        s_kappa=best.s,
        beta_kappa=float(best.beta),
        trajectory=best,
        case=ShootingCase.INTERIOR,
        pasting_residual_final=float(best.ddphi_at_beta),
        bisection_iters=iters,
        params=params,
    )
