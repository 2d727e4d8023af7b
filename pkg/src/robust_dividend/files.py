"""Config documents and CSV exports."""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from .errors import ValidationError
from .model import ModelParams, RewardFunction, RewardKind
from .shooting import IntegrationConfig
from .simulate import SimConfig
from .sweep import SweepReport
from .value import ValueFunction, default_audit_extent, kernel_profile, value_at

MODEL_KEYS = ("m", "sigma", "rho", "kappa", "reward")
INTEGRATION_KEYS = tuple(f.name for f in fields(IntegrationConfig))
SIM_KEYS = tuple(f.name for f in fields(SimConfig))


def load_config(path) -> dict:
    """Read a JSON config whose keys are model, integration and simulation field names."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(doc) - set(MODEL_KEYS + INTEGRATION_KEYS + SIM_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return doc


def reward_from(value: Any) -> RewardFunction:
    if isinstance(value, RewardFunction):
        return value
    if isinstance(value, str):
        return RewardFunction.parse(value)
    if isinstance(value, Mapping):
        try:
            kind = RewardKind[str(value["kind"]).upper()]
        except KeyError as exc:
            raise ValidationError(f"bad reward description {value!r}") from exc
        extra = set(value) - {"kind", "a", "cap_level", "b"}
        if extra:
            raise ValidationError(f"unknown reward keys {sorted(extra)}")
        return RewardFunction(kind, value.get("a", 0.0), value.get("cap_level", 0.0), value.get("b", 0.0))
    raise ValidationError(f"bad reward description {value!r}")


def reward_to_json(reward: RewardFunction) -> dict:
    return {"kind": reward.kind.name.lower(), "a": reward.a, "cap_level": reward.cap_level, "b": reward.b}


def _typed(cls, values: Mapping, keys) -> Any:
    kwargs = {k: values[k] for k in keys if values.get(k) is not None}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def params_from(values: Mapping) -> ModelParams:
    missing = [k for k in ("m", "sigma", "rho") if values.get(k) is None]
    if missing:
        raise ValidationError(f"missing model parameters: {missing}")
    try:
        return ModelParams(
            m=float(values["m"]), sigma=float(values["sigma"]), rho=float(values["rho"]),
            kappa=float(values.get("kappa") or 0.0),
            reward=reward_from(values.get("reward") or "zero"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from exc


def integration_from(values: Mapping) -> IntegrationConfig:
    return _typed(IntegrationConfig, values, INTEGRATION_KEYS)


def sim_from(values: Mapping) -> SimConfig:
    return _typed(SimConfig, values, SIM_KEYS)


def params_to_json(params: ModelParams) -> dict:
    return {"m": params.m, "sigma": params.sigma, "rho": params.rho,
            "kappa": params.kappa, "reward": reward_to_json(params.reward)}


def _fmt(x: float) -> str:
    return repr(float(x))


def grid_nodes(vf: ValueFunction, x_until: Optional[float] = None, spacing: Optional[float] = None) -> np.ndarray:
    """Solver nodes on [0, beta] followed by evenly spaced nodes on the linear branch."""
    top = default_audit_extent(vf) if x_until is None else float(x_until)
    if spacing is None:
        spacing = float(np.median(np.diff(vf.xs))) if vf.xs.size > 1 else 1e-2
        spacing = max(spacing, top / 10000.0)
    inner = vf.xs if vf.beta > 0 else np.zeros(0)
    n_out = int(np.floor((top - vf.beta) / spacing))
    outer = vf.beta + spacing * np.arange(1, n_out + 1)
    if vf.beta == 0.0:
        outer = np.concatenate([[0.0], outer])
    return np.concatenate([inner, outer])


def write_grid_csv(path, vf: ValueFunction, x_until: Optional[float] = None) -> int:
    """Write ``x,V,dV,ddV,kernel`` rows; returns the row count."""
    xs = grid_nodes(vf, x_until)
    V, dV, ddV = value_at(vf, xs)
    xi = kernel_profile(vf, xs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "V", "dV", "ddV", "kernel"])
        for row in zip(xs, V, dV, ddV, xi):
            w.writerow([_fmt(v) for v in row])
    return len(xs)


def sweep_column(x: float) -> str:
    return f"V_at_{float(x):.12g}"


def write_sweep_csv(path, report: SweepReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "s_kappa", "beta_kappa"] + [sweep_column(x) for x in report.x_grid])
        for j, k in enumerate(report.kappas):
            w.writerow([_fmt(k), _fmt(report.s_values[j]), _fmt(report.betas[j])]
                       + [_fmt(v) for v in report.v_samples[j]])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)
