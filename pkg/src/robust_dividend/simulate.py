"""Monte Carlo for threshold dividend strategies under an adverse drift kernel.

Each path (or antithetic pair) owns a PCG64 stream keyed by
``SeedSequence(seed, spawn_key=(unit,))``, and per-path results land in
fixed slots before an exactly rounded reduction, so the estimate does not
depend on how many worker threads ran the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import SimulationConfigError, ValidationError
from .model import ModelParams, _reward
from .value import ValueFunction

_BLOCK_UNITS = 256


# -- Skorokhod map -----------------------------------------------------------

@njit(cache=True)
def _exact_split(eta, zeta, beta):
    """Nudge by ulps so that chi + zeta == eta in floating point and chi <= beta."""
    n = eta.shape[0]
    chi = np.empty(n)
    level = 0.0
    for k in range(n):
        z = max(level, zeta[k])
        c = eta[k] - z
        for _ in range(8):
            if c + z != eta[k]:
                lo = np.nextafter(c, -np.inf)
                hi = np.nextafter(c, np.inf)
                if lo + z == eta[k]:
                    c = lo
                elif hi + z == eta[k]:
                    c = hi
            if c > beta and z > 0.0:
                z = np.nextafter(z, np.inf)
                c = eta[k] - z
            else:
                break
        zeta[k] = z
        chi[k] = c
        level = z
    return chi


def skorokhod_map(beta: float, eta) -> tuple[np.ndarray, np.ndarray]:
    """Reflect a discrete path below ``beta``.

    Returns ``(chi, zeta)`` with ``zeta_k = max(0, max_{j<=k}(eta_j - beta))``
    and ``chi = eta - zeta``. The first entry is the time-0 value, so a start
    above ``beta`` produces an immediate lump ``eta_0 - beta``.

    Entries are nudged by ulps so that ``chi + zeta == eta`` holds exactly in
    floating point whenever ``eta_k >= zeta_k / 2``, which covers every state
    with ``chi_k >= 0``. Deeper below zero ``chi_k`` and ``zeta_k`` share a
    grid coarser than that of ``eta_k`` and no pair of doubles sums to it;
    there the identity holds to one ulp of ``|eta_k| + zeta_k``.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 1 or eta.size == 0:
        raise ValidationError("eta must be a non-empty 1-d path")
    if not beta >= 0:
        raise ValidationError("beta must be >= 0")
    zeta = np.maximum(np.maximum.accumulate(eta - beta), 0.0)
    chi = _exact_split(eta, zeta, float(beta))
    return chi, zeta


# -- kernels and configuration -----------------------------------------------

class KernelSpec:
    """Adverse player's state-feedback Girsanov kernel."""

    code = -1

    def is_identically_zero(self, params: ModelParams) -> bool:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroKernel(KernelSpec):
    code = 0

    def is_identically_zero(self, params):
        return True

    def describe(self):
        return "zero"


@dataclass(frozen=True)
class ConstantKernel(KernelSpec):
    c: float = 0.0
    code = 1

    def is_identically_zero(self, params):
        return self.c == 0.0

    def describe(self):
        return f"const:{self.c!r}"


@dataclass(frozen=True)
class OptimalFromValue(KernelSpec):
    """xi(x) = -kappa sigma V'(x), with kappa and sigma of the simulated model."""

    vf: ValueFunction
    code = 2

    def is_identically_zero(self, params):
        return params.kappa == 0.0

    def describe(self):
        return "optimal"


def parse_kernel(text: str, vf: Optional[ValueFunction] = None) -> KernelSpec:
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "zero":
        return ZeroKernel()
    if name in ("const", "constant"):
        try:
            return ConstantKernel(float(arg))
        except ValueError as exc:
            raise SimulationConfigError(f"bad constant kernel {text!r}") from exc
    if name == "optimal":
        if vf is None:
            raise SimulationConfigError("optimal kernel needs a value function")
        return OptimalFromValue(vf)
    raise SimulationConfigError(f"unknown kernel {text!r}")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``ruin_bridge`` adds the Brownian-bridge probability of touching 0
    between grid points, exp(-2 X_k X_{k+1} / (sigma^2 dt)). Without it,
    grid-only ruin detection biases the payoff upward by O(sqrt(dt)).
    """

    dt: float = 1e-3
    n_paths: int = 20000
    horizon_eps: float = 1e-4
    seed: int = 0
    antithetic: bool = True
    ruin_bridge: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise SimulationConfigError("dt must be > 0")
        if int(self.n_paths) != self.n_paths or self.n_paths < 2:
            raise SimulationConfigError("n_paths must be an integer >= 2")
        if self.antithetic and self.n_paths % 2:
            raise SimulationConfigError("antithetic sampling needs an even n_paths")
        if not 0 < self.horizon_eps < 1:
            raise SimulationConfigError("horizon_eps must lie in (0, 1)")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise SimulationConfigError("seed must be an integer in [0, 2^64)")

    def horizon(self, rho: float) -> float:
        return math.log(1.0 / self.horizon_eps) / rho

    def n_steps(self, rho: float) -> int:
        return int(math.ceil(self.horizon(rho) / self.dt))


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    std_error: float
    reward_part: float
    dividend_part: float
    penalty_part: float
    ruin_fraction: float
    n_paths: int

    @property
    def components(self) -> tuple[float, float, float]:
        return self.reward_part, self.dividend_part, self.penalty_part


# -- path engine ---------------------------------------------------------------

@njit(cache=True, nogil=True)
def _slope(X, xs, dv, v, beta):
    if X >= beta or xs.shape[0] < 2:
        return 1.0
    i = np.searchsorted(xs, X, side="right") - 1
    if i < 0:
        i = 0
    if i > xs.shape[0] - 2:
        i = xs.shape[0] - 2
    h = xs[i + 1] - xs[i]
    t = (X - xs[i]) / h
    t2 = t * t
    return ((6 * t2 - 6 * t) / h) * v[i] + (3 * t2 - 4 * t + 1) * dv[i] \
        + ((-6 * t2 + 6 * t) / h) * v[i + 1] + (3 * t2 - 2 * t) * dv[i + 1]


@njit(cache=True, nogil=True)
def _run_unit(gen, n_legs, x0, beta, m, sigma, rho, kappa, kind, a, cap_level, b,
              kcode, kconst, xs, v, dv, vbeta, dt, n_steps, disc, bridge, out):
    """Simulate one stream: a single path, or an antithetic pair sharing normals.

    ``out[leg]`` receives (reward, dividend, penalty, ruined).
    """
    sdt = sigma * math.sqrt(dt)
    s2dt = sigma * sigma * dt
    X = np.empty(2)
    alive = np.zeros(2, dtype=np.bool_)
    for leg in range(n_legs):
        out[leg, 0] = 0.0
        out[leg, 1] = max(x0 - beta, 0.0)
        out[leg, 2] = 0.0
        X[leg] = min(x0, beta)
        alive[leg] = X[leg] > 0.0
        out[leg, 3] = 0.0 if alive[leg] else 1.0
    for k in range(n_steps):
        if not (alive[0] or (n_legs == 2 and alive[1])):
            break
        Z = gen.standard_normal()
        U = gen.random() if bridge else 1.0
        for leg in range(n_legs):
            if not alive[leg]:
                continue
            x = X[leg]
            if kcode == 0:
                xi = 0.0
            elif kcode == 1:
                xi = kconst
            else:
                xi = -kappa * sigma * _slope(x, xs, dv, v, vbeta)
            w = disc[k] * dt
            out[leg, 0] += w * _reward(x, kind, a, cap_level, b)
            if kappa > 0.0:
                out[leg, 2] += w * xi * xi / (2.0 * kappa)
            noise = Z if leg == 0 else -Z
            xn = x + (m + sigma * xi) * dt + sdt * noise
            if xn <= 0.0 or (bridge and U < math.exp(-2.0 * x * xn / s2dt)):
                alive[leg] = False
                out[leg, 3] = 1.0
                continue
            if xn > beta:
                out[leg, 1] += disc[k + 1] * (xn - beta)
                xn = beta
            X[leg] = xn


def _check_kernel(params: ModelParams, kernel: KernelSpec):
    if not isinstance(kernel, KernelSpec):
        raise SimulationConfigError("kernel must be a KernelSpec")
    if params.kappa == 0.0 and not kernel.is_identically_zero(params):
        raise SimulationConfigError("kappa = 0 admits only the zero kernel (penalty undefined)")
    if isinstance(kernel, OptimalFromValue) and kernel.vf.params != params:
        raise SimulationConfigError("value function was built for different parameters")


def _run_block(args):
    units, legs, seed, common, out = args
    buf = np.empty((2, 4))
    for u in units:
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(u),))))
        _run_unit(gen, legs, *common, buf)
        out[u * legs:(u + 1) * legs] = buf[:legs]


def _path_results(params, x0, beta, kernel, cfg, workers):
    legs = 2 if cfg.antithetic else 1
    n_units = cfg.n_paths // legs
    n_steps = cfg.n_steps(params.rho)
    disc = np.exp(-params.rho * cfg.dt * np.arange(n_steps + 1))
    if isinstance(kernel, OptimalFromValue):
        vf = kernel.vf
        xs, v, dv, vbeta = vf.xs, vf.v, vf.dv, vf.beta
    else:
        xs = v = dv = np.zeros(1)
        vbeta = 0.0
    kconst = kernel.c if isinstance(kernel, ConstantKernel) else 0.0
    common = (
        float(x0), float(beta), *params.coefficients(), kernel.code, float(kconst),
        np.ascontiguousarray(xs, dtype=float), np.ascontiguousarray(v, dtype=float),
        np.ascontiguousarray(dv, dtype=float), float(vbeta),
        float(cfg.dt), n_steps, disc, bool(cfg.ruin_bridge),
    )
    out = np.empty((cfg.n_paths, 4))
    blocks = [range(i, min(i + _BLOCK_UNITS, n_units)) for i in range(0, n_units, _BLOCK_UNITS)]
    tasks = [(blk, legs, int(cfg.seed), common, out) for blk in blocks]
    if workers <= 1:
        for t in tasks:
            _run_block(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_block, tasks))
    return out, legs


def _estimate(out: np.ndarray, legs: int) -> PayoffEstimate:
    n = out.shape[0]
    reward_part = math.fsum(out[:, 0]) / n
    dividend_part = math.fsum(out[:, 1]) / n
    penalty_part = math.fsum(out[:, 2]) / n
    totals = out[:, 0] + out[:, 1] + out[:, 2]
    units = totals.reshape(-1, legs).mean(axis=1)
    se = float(np.std(units, ddof=1) / math.sqrt(units.size)) if units.size > 1 else 0.0
    return PayoffEstimate(
        mean=reward_part + dividend_part + penalty_part,
        std_error=se,
        reward_part=reward_part,
        dividend_part=dividend_part,
        penalty_part=penalty_part,
        ruin_fraction=math.fsum(out[:, 3]) / n,
        n_paths=n,
    )


def simulate_payoff(
    params: ModelParams,
    x0: float,
    beta: float,
    kernel: KernelSpec,
    cfg: Optional[SimConfig] = None,
    workers: int = 1,
) -> PayoffEstimate:
    """Estimate the penalized payoff of the ``beta``-threshold strategy.

    Euler steps of dX = (m + sigma xi(X)) dt + sigma dW, followed by paying
    out any excess over ``beta``. Running reward and the entropy penalty
    xi^2 / (2 kappa) accrue at the left end of each step, discounted at rho.

    Raises:
        SimulationConfigError: for a non-zero kernel at kappa = 0, or
            inconsistent settings.
    """
    cfg = cfg or SimConfig()
    if not x0 >= 0:
        raise SimulationConfigError("x0 must be >= 0")
    if not beta >= 0:
        raise SimulationConfigError("beta must be >= 0")
    _check_kernel(params, kernel)
    out, legs = _path_results(params, x0, beta, kernel, cfg, max(1, int(workers)))
    return _estimate(out, legs)


# -- equilibrium probe -----------------------------------------------------------

@dataclass(frozen=True)
class ProbeRow:
    label: str
    side: str  # "equilibrium", "maximizer" or "minimizer"
    beta: float
    kernel: str
    estimate: PayoffEstimate


@dataclass(frozen=True)
class SaddleCheck:
    label: str
    side: str
    gap: float  # deviation mean minus equilibrium mean
    bound: float  # 3 * pooled standard error
    ok: bool


def equilibrium_probe(
    params: ModelParams,
    x0: float,
    vf: ValueFunction,
    deviations: Sequence[tuple[float, Optional[KernelSpec]]],
    cfg: Optional[SimConfig] = None,
    workers: int = 1,
) -> list[ProbeRow]:
    """Payoffs at the equilibrium pair and at one-sided deviations from it.

    Each deviation ``(beta_shift, kernel_override)`` moves exactly one player:
    either a non-zero threshold shift against the optimal kernel, or a zero
    shift with a replacement kernel. All rows reuse the seed in ``cfg``.
    """
    cfg = cfg or SimConfig()
    eq_kernel = OptimalFromValue(vf)
    rows = [ProbeRow("equilibrium", "equilibrium", vf.beta, "optimal",
                     simulate_payoff(params, x0, vf.beta, eq_kernel, cfg, workers))]
    for shift, override in deviations:
        if (shift != 0.0) == (override is not None):
            raise ValidationError("each deviation must perturb exactly one player")
        if override is None:
            beta = vf.beta + shift
            if beta < 0:
                raise ValidationError(f"shifted threshold {beta} is negative")
            rows.append(ProbeRow(f"beta{shift:+g}", "maximizer", beta, "optimal",
                                 simulate_payoff(params, x0, beta, eq_kernel, cfg, workers)))
        else:
            rows.append(ProbeRow(f"kernel {override.describe()}", "minimizer", vf.beta,
                                 override.describe(),
                                 simulate_payoff(params, x0, vf.beta, override, cfg, workers)))
    return rows


def saddle_checks(rows: Sequence[ProbeRow], n_se: float = 3.0) -> list[SaddleCheck]:
    eq = rows[0].estimate
    checks = []
    for row in rows[1:]:
        est = row.estimate
        bound = n_se * math.hypot(eq.std_error, est.std_error)
        gap = est.mean - eq.mean
        ok = gap <= bound if row.side == "maximizer" else gap >= -bound
        checks.append(SaddleCheck(row.label, row.side, gap, bound, ok))
    return checks
