"""Sweeps over the ambiguity level and continuity diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, RobustDividendError, ValidationError
from .model import ModelParams
from .shooting import IntegrationConfig, solve_shooting
from .value import ValueFunction, build_value_function, value_at


@dataclass(frozen=True)
class SweepReport:
    kappas: np.ndarray
    betas: np.ndarray
    s_values: np.ndarray
    x_grid: np.ndarray
    v_samples: np.ndarray  # shape (len(kappas), len(x_grid))
    monotonicity_violations: list  # (x, kappa, gap) with gap = V(x; kappa) - V(x; previous kappa)
    sup_diff_to_zero: Optional[np.ndarray]
    saturated: np.ndarray
    value_functions: tuple = ()

    @property
    def empirical_rate_constant(self) -> Optional[float]:
        """max over kappa > 0 of sup_x |V(x; kappa) - V(x; 0)| / kappa."""
        if self.sup_diff_to_zero is None:
            return None
        pos = self.kappas > 0
        if not np.any(pos):
            return None
        return float(np.max(self.sup_diff_to_zero[pos] / self.kappas[pos]))


@dataclass(frozen=True)
class ContinuityDiagnostic:
    kappa: float
    half: float
    beta_gap: float
    ratio: float
    linear_rate_consistent: bool


def _check_grid(name, grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty list")
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValidationError(f"{name} entries must be finite and >= 0")
    if np.any(np.diff(arr) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    return arr


def _solve_one(base: ModelParams, kappa: float, cfg) -> ValueFunction:
    try:
        return build_value_function(solve_shooting(base.with_kappa(kappa), cfg=cfg))
    except RobustDividendError as exc:
        exc.kappa = kappa
        exc.args = (f"solve failed at kappa={kappa!r}: {exc}",)
        raise


def run_sweep(
    base: ModelParams,
    kappa_grid: Sequence[float],
    x_grid: Sequence[float],
    cfg: Optional[IntegrationConfig] = None,
    workers: int = 1,
    tol: float = 1e-8,
) -> SweepReport:
    """Solve every kappa independently and tabulate V on ``x_grid``.

    ``base.kappa`` is ignored. ``sup_diff_to_zero`` is only filled when the
    grid contains 0; the sup is taken on ``x_grid`` joined with a fine grid
    over [0, max beta + m / rho]. Past max beta both value functions have
    slope 1, so this window gives the exact sup; that is checked.
    """
    kappas = _check_grid("kappa_grid", kappa_grid)
    xg = _check_grid("x_grid", x_grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vfs = list(pool.map(lambda k: _solve_one(base, float(k), cfg), kappas))
    else:
        vfs = [_solve_one(base, float(k), cfg) for k in kappas]

    betas = np.array([vf.beta for vf in vfs])
    s_values = np.array([vf.s_kappa for vf in vfs])
    v_samples = np.vstack([value_at(vf, xg)[0] for vf in vfs])
    violations = []
    for j in range(1, len(kappas)):
        gap = v_samples[j] - v_samples[j - 1]
        for i in np.flatnonzero(gap > tol):
            violations.append((float(xg[i]), float(kappas[j]), float(gap[i])))

    sup_diff = None
    if kappas[0] == 0.0:
        top = float(betas.max()) + base.m / base.rho
        audit = np.union1d(xg, np.linspace(0.0, top, 2001))
        v0 = value_at(vfs[0], audit)[0]
        tail = np.array([float(betas.max()), top])
        t0 = value_at(vfs[0], tail)[0]
        sup_diff = np.empty(len(kappas))
        for j, vf in enumerate(vfs):
            sup_diff[j] = float(np.max(np.abs(value_at(vf, audit)[0] - v0)))
            tj = value_at(vf, tail)[0] - t0
            if abs(tj[1] - tj[0]) > 1e-9:
                raise ConvergenceError("V(.;kappa) - V(.;0) is not constant beyond the thresholds",
                                       kappa=float(kappas[j]))
    saturated = np.array([base.with_kappa(float(k)).is_saturated for k in kappas])
    return SweepReport(
        kappas=kappas, betas=betas, s_values=s_values, x_grid=xg, v_samples=v_samples,
        monotonicity_violations=violations, sup_diff_to_zero=sup_diff,
        saturated=saturated, value_functions=tuple(vfs),
    )


def _index_of(kappas: np.ndarray, k: float) -> int:
    hits = np.flatnonzero(np.isclose(kappas, k, rtol=1e-12, atol=1e-15))
    if hits.size == 0:
        raise ValidationError(f"kappa={k!r} is not in the sweep")
    return int(hits[0])


def check_continuity(
    report: SweepReport,
    halving_pairs: Sequence[tuple[float, float]],
    band: tuple[float, float] = (0.35, 0.65),
) -> list[ContinuityDiagnostic]:
    """Threshold gaps and sup-distance ratios for (kappa, kappa/2) pairs.

    A ratio sup|V(kappa/2) - V(0)| / sup|V(kappa) - V(0)| inside ``band``
    is consistent with a linear rate in kappa as kappa -> 0.
    """
    if report.sup_diff_to_zero is None:
        raise ValidationError("continuity check needs kappa = 0 in the sweep")
    out = []
    for k, half in halving_pairs:
        k, half = float(k), float(half)
        if k <= 0.0 or not math.isclose(half, k / 2.0, rel_tol=1e-12):
            raise ValidationError(f"({k!r}, {half!r}) is not a (kappa, kappa/2) pair with kappa > 0")
        i, j = _index_of(report.kappas, k), _index_of(report.kappas, half)
        denom = report.sup_diff_to_zero[i]
        ratio = float(report.sup_diff_to_zero[j] / denom) if denom > 0 else math.nan
        out.append(ContinuityDiagnostic(
            kappa=k, half=half,
            beta_gap=abs(float(report.betas[i] - report.betas[j])),
            ratio=ratio,
            linear_rate_consistent=bool(band[0] <= ratio <= band[1]),
        ))
    return out
