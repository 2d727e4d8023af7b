"""Model parameters, running rewards, the Hamiltonian and its mollified form.

Scalar kernels (``_reward``, ``_hamiltonian``, ``_mollify``) are compiled with
numba so the shooting integrator and the Monte Carlo engine share one
implementation with the public Python functions below.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import ValidationError


class RewardKind(enum.IntEnum):
    ZERO = 0
    LINEAR = 1
    CAPPED = 2
    SATURATING = 3


def _reward_impl(x, kind, a, cap_level, b):
    if kind == 0:
        return 0.0 * x
    if kind == 1:
        return a * x
    if kind == 2:
        return a * np.minimum(x, cap_level)
    return (a / b) * (-np.expm1(-b * x))


def _hamiltonian_impl(x, y, z, m, sigma, rho, kappa, kind, a, cap_level, b):
    s2 = sigma * sigma
    return (2.0 / s2) * (
        m * z - 0.5 * s2 * kappa * z * z - rho * y + _reward_impl(x, kind, a, cap_level, b)
    )


_reward = njit(cache=True, nogil=True)(_reward_impl)


@njit(cache=True, nogil=True)
def _hamiltonian(x, y, z, m, sigma, rho, kappa, kind, a, cap_level, b):
    s2 = sigma * sigma
    return (2.0 / s2) * (
        m * z - 0.5 * s2 * kappa * z * z - rho * y + _reward(x, kind, a, cap_level, b)
    )


@njit(cache=True, nogil=True)
def _mollify(z, cap):
    if z < -2.0 * cap:
        return -1.5 * cap
    if z < -cap:
        return 0.5 * cap + 2.0 * z + z * z / (2.0 * cap)
    if z <= cap:
        return z
    if z < 2.0 * cap:
        return -0.5 * cap + 2.0 * z - z * z / (2.0 * cap)
    return 1.5 * cap


@dataclass(frozen=True)
class RewardFunction:
    """Running reward ``f`` from a closed family of shapes.

    ``Zero``: f = 0. ``Linear(a)``: f = a x. ``Capped(a, M)``: f = a min(x, M).
    ``Saturating(a, b)``: f = (a / b)(1 - exp(-b x)). Every member is
    non-negative, non-decreasing, vanishes at 0 and is ``a``-Lipschitz.
    """

    kind: RewardKind = RewardKind.ZERO
    a: float = 0.0
    cap_level: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RewardKind(self.kind))
        for name in ("a", "cap_level", "b"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"reward parameter {name} must be finite")
            object.__setattr__(self, name, value)
        if self.kind is RewardKind.ZERO:
            object.__setattr__(self, "a", 0.0)
        elif self.a < 0:
            raise ValidationError("reward slope a must be >= 0")
        if self.kind is RewardKind.CAPPED and self.cap_level <= 0:
            raise ValidationError("capped reward needs M > 0")
        if self.kind is RewardKind.SATURATING and self.b <= 0:
            raise ValidationError("saturating reward needs b > 0")

    @classmethod
    def zero(cls) -> RewardFunction:
        return cls(RewardKind.ZERO)

    @classmethod
    def linear(cls, a: float) -> RewardFunction:
        return cls(RewardKind.LINEAR, a)

    @classmethod
    def capped(cls, a: float, cap_level: float) -> RewardFunction:
        return cls(RewardKind.CAPPED, a, cap_level)

    @classmethod
    def saturating(cls, a: float, b: float) -> RewardFunction:
        return cls(RewardKind.SATURATING, a, 0.0, b)

    @classmethod
    def parse(cls, text: str) -> RewardFunction:
        """Parse ``zero``, ``linear:a``, ``capped:a,M`` or ``saturating:a,b``."""
        name, _, args = text.strip().partition(":")
        name = name.lower()
        try:
            values = [float(v) for v in args.split(",")] if args else []
        except ValueError as exc:
            raise ValidationError(f"bad reward arguments in {text!r}") from exc
        arity = {"zero": 0, "linear": 1, "capped": 2, "saturating": 2}
        if name not in arity:
            raise ValidationError(f"unknown reward kind {name!r}")
        if len(values) != arity[name]:
            raise ValidationError(f"reward {name!r} takes {arity[name]} argument(s)")
        return getattr(cls, name)(*values)

    @property
    def lipschitz_bound(self) -> float:
        return self.a

    def spec_string(self) -> str:
        if self.kind is RewardKind.ZERO:
            return "zero"
        if self.kind is RewardKind.LINEAR:
            return f"linear:{self.a!r}"
        if self.kind is RewardKind.CAPPED:
            return f"capped:{self.a!r},{self.cap_level!r}"
        return f"saturating:{self.a!r},{self.b!r}"

    def coefficients(self) -> tuple[int, float, float, float]:
        return int(self.kind), self.a, self.cap_level, self.b

    def __call__(self, x):
        return eval_f(self, x)


@dataclass(frozen=True)
class ModelParams:
    """Market and ambiguity parameters.

    Attributes:
        m: drift of the uncontrolled surplus.
        sigma: volatility.
        rho: discount rate.
        kappa: ambiguity level; 0 is the risk-neutral model.
        reward: running reward, Lipschitz with constant strictly below ``rho``.
        delta: ``rho - reward.lipschitz_bound``, derived at construction.
    """

    m: float
    sigma: float
    rho: float
    kappa: float = 0.0
    reward: RewardFunction = field(default_factory=RewardFunction.zero)
    delta: float = field(init=False)

    def __post_init__(self):
        for name in ("m", "sigma", "rho", "kappa"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.m <= 0:
            raise ValidationError("m must be > 0")
        if self.sigma <= 0:
            raise ValidationError("sigma must be > 0")
        if self.rho <= 0:
            raise ValidationError("rho must be > 0")
        if self.kappa < 0:
            raise ValidationError("kappa must be >= 0")
        if not isinstance(self.reward, RewardFunction):
            raise ValidationError("reward must be a RewardFunction")
        if self.reward.lipschitz_bound >= self.rho:
            raise ValidationError(
                f"reward Lipschitz bound {self.reward.lipschitz_bound} must be < rho={self.rho}"
            )
        object.__setattr__(self, "delta", self.rho - self.reward.lipschitz_bound)

    def with_kappa(self, kappa: float) -> ModelParams:
        return replace(self, kappa=kappa)

    @property
    def saturation_kappa(self) -> float:
        """Smallest kappa at which paying everything out at once is optimal."""
        return 2.0 * self.m / self.sigma**2

    @property
    def is_saturated(self) -> bool:
        return 2.0 * self.m <= self.sigma**2 * self.kappa

    @property
    def threshold_bound(self) -> float:
        return self.m / self.delta

    @property
    def slope_bound(self) -> float:
        """A-priori bound exp(2 m^2 / (sigma^2 delta)) on the optimal initial slope."""
        return math.exp(2.0 * self.m**2 / (self.sigma**2 * self.delta))

    def coefficients(self) -> tuple:
        return (self.m, self.sigma, self.rho, self.kappa) + self.reward.coefficients()


@dataclass(frozen=True)
class MollifierCap:
    """The level up to which the slope mollifier is the identity."""

    cap: float

    def __post_init__(self):
        cap = float(self.cap)
        if not (math.isfinite(cap) and cap > 1.0):
            raise ValidationError(f"mollifier cap must be a finite number > 1, got {self.cap}")
        object.__setattr__(self, "cap", cap)

    @classmethod
    def default(cls, params: ModelParams) -> MollifierCap:
        # every slope the shooting bracket can produce lies below this
        return cls(1.0 + params.slope_bound)


def _cap_value(cap) -> float:
    value = cap.cap if isinstance(cap, MollifierCap) else float(cap)
    if not value > 0:
        raise ValidationError(f"mollifier cap must be > 0, got {value}")
    return value


def _check_surplus(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValidationError("surplus must be >= 0")
    return arr


def eval_f(reward: RewardFunction, x):
    """Evaluate the running reward at surplus ``x`` (scalar or array)."""
    arr = _check_surplus(x)
    out = _reward_impl(arr, *reward.coefficients())
    return float(out) if arr.ndim == 0 else out


def eval_H(params: ModelParams, x, y, z):
    """H(x, y, z) = (2/sigma^2)(m z - sigma^2 kappa z^2 / 2 - rho y + f(x))."""
    arr = _check_surplus(x)
    out = _hamiltonian_impl(arr, np.asarray(y, float), np.asarray(z, float), *params.coefficients())
    return float(out) if np.ndim(out) == 0 else out


def mollifier_F(z, cap):
    """Bounded C^1 slope mollifier: identity on [-cap, cap], flat beyond 2 cap."""
    c = _cap_value(cap)
    if np.ndim(z) == 0:
        return float(_mollify(float(z), c))
    zz = np.asarray(z, dtype=float)
    return np.select(
        [zz < -2.0 * c, zz < -c, zz <= c, zz < 2.0 * c],
        [
            np.full_like(zz, -1.5 * c),
            0.5 * c + 2.0 * zz + zz * zz / (2.0 * c),
            zz,
            -0.5 * c + 2.0 * zz - zz * zz / (2.0 * c),
        ],
        default=1.5 * c,
    )


def eval_H_F(params: ModelParams, cap, x, y, z):
    return eval_H(params, x, y, mollifier_F(z, cap))


def optimal_kernel(params: ModelParams, v_prime):
    """Adverse player's feedback kernel -kappa sigma V'(x).

    Raises:
        ValidationError: if any slope is below one, which never happens for a
            genuine value function.
    """
    vp = np.asarray(v_prime, dtype=float)
    if np.any(vp < 1.0 - 1e-9) or np.any(np.isnan(vp)):
        raise ValidationError("value slopes must be >= 1")
    out = -params.kappa * params.sigma * vp + 0.0  # no negative zeros
    return float(out) if vp.ndim == 0 else out
