"""Robust optimal dividends under drift ambiguity: shooting solver and Monte Carlo checks."""

from .baseline import (
    ClosedFormSolution, characteristic_roots, closed_form_barrier, closed_form_solution,
    closed_form_value,
)
from .errors import (
    ConvergenceError, NumericalBlowupError, RobustDividendError, SimulationConfigError,
    ValidationError,
)
from .model import (
    ModelParams, MollifierCap, RewardFunction, RewardKind, eval_f, eval_H, eval_H_F,
    mollifier_F, optimal_kernel,
)
from .shooting import (
    TOO_LARGE, CauchyTrajectory, IntegrationConfig, ShootingCase, ShootingResult, Terminal,
    integrate_cauchy, pasting_residual, solve_shooting,
)
from .simulate import (
    ConstantKernel, KernelSpec, OptimalFromValue, PayoffEstimate, SimConfig, ZeroKernel,
    equilibrium_probe, saddle_checks, simulate_payoff, skorokhod_map,
)
from .sweep import ContinuityDiagnostic, SweepReport, check_continuity, run_sweep
from .value import (
    ResidualReport, ValueFunction, build_value_function, hjb_residual, kernel_profile, value_at,
)

__version__ = "0.1.0"
