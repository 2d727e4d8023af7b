"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 solver convergence error,
4 simulation configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .baseline import closed_form_solution, closed_form_value
from .errors import RobustDividendError, SimulationConfigError, ValidationError
from .files import (
    integration_from, load_config, params_from, params_to_json, sim_from,
    write_grid_csv, write_sweep_csv,
)
from .model import MollifierCap
from .shooting import solve_shooting
from .simulate import ConstantKernel, equilibrium_probe, parse_kernel, saddle_checks, simulate_payoff
from .sweep import check_continuity, run_sweep
from .value import build_value_function, default_audit_extent, hjb_residual, value_at


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive, like numpy.linspace)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}") from exc


def _model_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON document with model/integration/simulation fields")
    p.add_argument("--m", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--reward", help="zero | linear:a | capped:a,M | saturating:a,b")
    p.add_argument("--step", type=float)
    p.add_argument("--xmax", dest="x_max", type=float)


def _sim_args(p: argparse.ArgumentParser):
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--paths", dest="n_paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon-eps", dest="horizon_eps", type=float)
    p.add_argument("--no-antithetic", dest="antithetic", action="store_false", default=None)
    p.add_argument("--grid-ruin", dest="ruin_bridge", action="store_false", default=None,
                   help="detect ruin on the time grid only (no bridge correction)")
    p.add_argument("--workers", type=int, default=1)


def _merged(args) -> dict:
    values = load_config(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key in ("config", "command", "func") or val is None:
            continue
        values[key] = val
    return values


def _solve(values):
    params = params_from(values)
    cfg = integration_from(values)
    t0 = time.perf_counter()
    result = solve_shooting(params, MollifierCap.default(params), cfg)
    return params, result, build_value_function(result), time.perf_counter() - t0


def cmd_solve(args) -> int:
    params, result, vf, elapsed = _solve(_merged(args))
    report = hjb_residual(vf)
    print(f"case,{result.case.value}")
    print(f"s_kappa,{result.s_kappa!r}")
    print(f"beta_kappa,{result.beta_kappa!r}")
    print(f"pasting_residual,{result.pasting_residual_final!r}")
    print(f"max_ode_residual,{report.max_ode_residual!r}")
    print(f"max_vi_violation,{report.max_vi_violation!r}")
    print(f"solve_seconds,{elapsed:.4f}")
    rows = write_grid_csv(args.out, vf, args.x_until)
    print(f"grid_csv,{args.out},{rows}")
    return 0


def cmd_baseline(args) -> int:
    values = _merged(args)
    params, result, vf, _ = _solve(values)
    sol = closed_form_solution(params)
    print(f"r1,{sol.r1!r}")
    print(f"r2,{sol.r2!r}")
    print(f"beta_star,{sol.beta_star!r}")
    print(f"C,{sol.C!r}")
    print(f"s0,{sol.initial_slope!r}")
    print(f"shooting_beta,{result.beta_kappa!r}")
    print(f"shooting_s,{result.s_kappa!r}")
    print(f"beta_abs_diff,{abs(result.beta_kappa - sol.beta_star)!r}")
    print(f"s_abs_diff,{abs(result.s_kappa - sol.initial_slope)!r}")
    xs = np.linspace(0.0, default_audit_extent(vf), 401)
    gap = np.max(np.abs(value_at(vf, xs)[0] - closed_form_value(sol, xs)[0]))
    print(f"sup_value_diff,{float(gap)!r}")
    return 0


def cmd_sweep(args) -> int:
    values = _merged(args)
    base = params_from(values)
    cfg = integration_from(values)
    kappas = parse_grid(args.kappa_grid)
    xg = parse_grid(args.x_grid)
    halvings = parse_grid(args.halvings) if args.halvings else []
    grid = sorted(set(kappas) | set(halvings) | ({0.0} if halvings else set()))
    report = run_sweep(base, grid, xg, cfg, workers=args.workers)
    write_sweep_csv(args.out, report)
    print(f"sweep_csv,{args.out},{len(report.kappas)}")
    print(f"monotonicity_violations,{len(report.monotonicity_violations)}")
    for x, k, gap in report.monotonicity_violations:
        print(f"violation,{x!r},{k!r},{gap!r}")
    if report.empirical_rate_constant is not None:
        print(f"empirical_C,{report.empirical_rate_constant!r}")
    if halvings:
        pairs = list(zip(halvings[:-1], halvings[1:]))
        print("kappa,half,beta_gap,ratio,linear_rate_consistent")
        for d in check_continuity(report, pairs):
            print(f"{d.kappa!r},{d.half!r},{d.beta_gap!r},{d.ratio!r},{d.linear_rate_consistent}")
    if args.json:
        doc = {
            "params": params_to_json(base),
            "kappas": report.kappas.tolist(), "betas": report.betas.tolist(),
            "s_values": report.s_values.tolist(), "x_grid": report.x_grid.tolist(),
            "v_samples": report.v_samples.tolist(),
            "monotonicity_violations": report.monotonicity_violations,
            "sup_diff_to_zero": None if report.sup_diff_to_zero is None else report.sup_diff_to_zero.tolist(),
            "saturated": report.saturated.tolist(),
        }
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=1)
    return 0


_EST_FIELDS = ("mean", "std_error", "reward_part", "dividend_part", "penalty_part", "ruin_fraction", "n_paths")


def _est_row(est) -> str:
    return ",".join(repr(getattr(est, f)) for f in _EST_FIELDS)


def cmd_simulate(args) -> int:
    values = _merged(args)
    params, result, vf, _ = _solve(values)
    cfg = sim_from(values)
    kernel = parse_kernel(args.kernel, vf)
    beta = result.beta_kappa if args.beta is None else args.beta
    est = simulate_payoff(params, args.x0, beta, kernel, cfg, workers=args.workers)
    print("beta,kernel," + ",".join(_EST_FIELDS))
    print(f"{beta!r},{kernel.describe()}," + _est_row(est))
    return 0


def cmd_probe(args) -> int:
    values = _merged(args)
    params, _, vf, _ = _solve(values)
    cfg = sim_from(values)
    shifts = parse_grid(args.beta_shifts) if args.beta_shifts else []
    consts = parse_grid(args.const_kernels) if args.const_kernels else []
    deviations = [(s, None) for s in shifts] + [(0.0, ConstantKernel(c)) for c in consts]
    rows = equilibrium_probe(params, args.x0, vf, deviations, cfg, workers=args.workers)
    print("label,side,beta,kernel," + ",".join(_EST_FIELDS))
    for r in rows:
        print(f"{r.label},{r.side},{r.beta!r},{r.kernel}," + _est_row(r.estimate))
    print("check,side,gap,bound,ok")
    ok = True
    for c in saddle_checks(rows):
        print(f"{c.label},{c.side},{c.gap!r},{c.bound!r},{c.ok}")
        ok &= c.ok
    print(f"saddle_consistent,{ok}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-dividend", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="shooting solve; writes the value grid CSV")
    _model_args(p)
    p.add_argument("--out", default="value_grid.csv")
    p.add_argument("--x-until", dest="x_until", type=float, help="extent of the exported grid")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="closed form at kappa = 0, f = 0 vs the shooting solve")
    _model_args(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="solve over a kappa grid")
    _model_args(p)
    p.add_argument("--kappa-grid", required=True, help="list a,b,c or start:stop:count")
    p.add_argument("--x-grid", default="0:4:41")
    p.add_argument("--halvings", help="chain k,k/2,k/4,... for continuity diagnostics")
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--json", help="also write the full report as JSON")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo payoff of a threshold strategy")
    _model_args(p)
    _sim_args(p)
    p.add_argument("--beta", type=float, help="threshold (default: solved beta_kappa)")
    p.add_argument("--kernel", default="optimal", help="zero | optimal | const:c")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("probe", help="equilibrium deviations")
    _model_args(p)
    _sim_args(p)
    p.add_argument("--beta-shifts", default="-0.3,0.3")
    p.add_argument("--const-kernels", default="")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RobustDividendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
