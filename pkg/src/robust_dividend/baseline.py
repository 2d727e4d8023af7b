"""Closed-form dividend barrier for the risk-neutral model with no running reward.

With kappa = 0 and f = 0 the ODE on [0, beta] is linear with constant
coefficients, (sigma^2/2) V'' + m V' - rho V = 0, so
V(x) = C (exp(r1 x) - exp(r2 x)). Smooth pasting V''(beta) = 0 fixes
beta = ln(r2^2 / r1^2) / (r1 - r2), and V'(beta) = 1 fixes C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import ModelParams, RewardKind


@dataclass(frozen=True)
class ClosedFormSolution:
    r1: float
    r2: float
    beta_star: float
    C: float

    @property
    def initial_slope(self) -> float:
        return self.C * (self.r1 - self.r2)


def _require_risk_neutral(params: ModelParams, need_zero_reward: bool = True):
    if params.kappa != 0.0:
        raise ValidationError("closed form requires kappa = 0")
    if need_zero_reward and params.reward.kind is not RewardKind.ZERO:
        raise ValidationError("closed form requires a zero running reward")


def characteristic_roots(params: ModelParams) -> tuple[float, float]:
    """Roots of (sigma^2/2) r^2 + m r - rho = 0, positive one first."""
    _require_risk_neutral(params, need_zero_reward=False)
    return quadratic_roots(params.m, params.sigma, params.rho)


def quadratic_roots(m: float, sigma: float, rho: float) -> tuple[float, float]:
    """Same roots from raw coefficients; accepts m = 0."""
    s2 = sigma * sigma
    disc = math.sqrt(m * m + 2.0 * s2 * rho)
    # rationalized form of (-m + disc) / s2 avoids cancellation
    return 2.0 * rho / (m + disc), -(m + disc) / s2


def closed_form_solution(params: ModelParams) -> ClosedFormSolution:
    _require_risk_neutral(params)
    r1, r2 = characteristic_roots(params)
    beta = math.log(r2 * r2 / (r1 * r1)) / (r1 - r2)
    C = 1.0 / (r1 * math.exp(r1 * beta) - r2 * math.exp(r2 * beta))
    return ClosedFormSolution(r1, r2, beta, C)


def closed_form_barrier(params: ModelParams) -> float:
    return closed_form_solution(params).beta_star


def closed_form_value(sol: ClosedFormSolution, x):
    """(V, V') of the closed-form solution; scalar or array ``x``."""
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0):
        raise ValidationError("surplus must be >= 0")
    b = sol.beta_star
    xc = np.minimum(xx, b)
    e1, e2 = np.exp(sol.r1 * xc), np.exp(sol.r2 * xc)
    V = sol.C * (e1 - e2)
    dV = sol.C * (sol.r1 * e1 - sol.r2 * e2)
    v_b = sol.C * (math.exp(sol.r1 * b) - math.exp(sol.r2 * b))
    above = xx > b
    V = np.where(above, (xx - b) + v_b, V)
    dV = np.where(above, 1.0, dV)
    if xx.ndim == 0:
        return float(V), float(dV)
    return V, dV
