"""Scenario files: schema, random generation, and the end-to-end runner.

A scenario bundles a model, an initial state, integration settings, and
analysis toggles.  `run_scenario` executes the requested analyses in a
fixed order (validate, spectral, equilibrium/compare, simulate,
observe), writes the trajectory CSV and one aggregated JSON report, and
returns the report plus the process exit code: 0 on success, 2 when any
analysis hit a hypothesis violation or module error (reported, not
crashed).  Parse failures raise ParseError (exit 1 at the CLI).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import equilibria, observability, spectral
from .dynamics import SimulationControls, simulate, trajectory_to_csv
from .errors import (GenerationFailure, NotIrreducible, ParseError, SiwsError,
                     WrongRegime)
from .model import LayeredModel, State, model_from_dict, model_to_dict
from .spectral import is_irreducible

__all__ = [
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "run_scenario",
    "generate_random_scenario",
    "REPORT_KEYS",
]

# Every report carries exactly these keys; skipped analyses stay null.
REPORT_KEYS = ("scenario", "validate", "spectral", "equilibrium", "compare",
               "sis", "simulate", "observe", "errors", "exit_code")

_DEFAULT_ANALYSES = {
    "spectral": True,
    "equilibrium": True,
    "compare": False,
    "sis": False,
    "simulate": True,
    "observe": False,
}


@dataclass
class Scenario:
    """Parsed scenario: model config plus run settings.

    The model is kept as a raw dict; validation happens inside
    `run_scenario` so that parameter problems are reported (exit 2)
    rather than crashing the parse (exit 1).
    """

    name: str
    model_cfg: dict
    initial_state: dict | None
    t_end: float
    samples: int
    seed: int | None
    analyses: dict

    def build_model(self) -> LayeredModel:
        return model_from_dict(self.model_cfg)


def scenario_from_dict(cfg: dict, name: str = "scenario") -> Scenario:
    """Parse a scenario dict against the schema; raises ParseError."""
    if not isinstance(cfg, dict):
        raise ParseError("scenario must be a JSON object")
    for key in ("population", "infrastructure", "coupling"):
        if key not in cfg:
            raise ParseError(f"missing required section '{key}'")
    analyses = dict(_DEFAULT_ANALYSES)
    user = cfg.get("analyses", {})
    if not isinstance(user, dict):
        raise ParseError("'analyses' must be an object")
    for key, value in user.items():
        if key not in _DEFAULT_ANALYSES:
            raise ParseError(f"unknown analysis toggle '{key}'")
        analyses[key] = value

    init = cfg.get("initial_state")
    if init is not None:
        if not isinstance(init, dict) or "x" not in init or "w" not in init:
            raise ParseError("'initial_state' must carry 'x' and 'w'")
    if init is None:
        analyses["simulate"] = False

    try:
        t_end = float(cfg.get("t_end", 200.0))
        samples = int(cfg.get("samples", 200))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad t_end/samples: {exc}") from exc
    seed = cfg.get("seed")
    if seed is None and analyses.get("observe"):
        raise ParseError("a seed is required when randomized analyses "
                         "(observe) are enabled")
    return Scenario(name=name, model_cfg=cfg, initial_state=init,
                    t_end=t_end, samples=samples, seed=seed,
                    analyses=analyses)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}") from exc
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(cfg, name=name)


def _error_entry(analysis: str, exc: Exception) -> dict:
    return {"analysis": analysis, "type": type(exc).__name__,
            "message": str(exc)}


def run_scenario(scenario: Scenario | str, out_dir: str) -> tuple[dict, int]:
    """Run all requested analyses; write CSV + report.json under out_dir.

    Returns:
        (report, exit_code): exit 0 on clean success, 2 when any
        analysis recorded an error (hypothesis violations included).
    """
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    os.makedirs(out_dir, exist_ok=True)
    report = {key: None for key in REPORT_KEYS}
    report["scenario"] = scenario.name
    report["errors"] = []

    model = None
    try:
        model = scenario.build_model()
        report["validate"] = {
            "n": model.n,
            "m": model.m,
            "regime": model.regime.value,
            "satisfies_a1": model.satisfies_a1,
            "satisfies_a2": model.satisfies_a2,
            "irreducible": is_irreducible(model.b_f),
        }
    except SiwsError as exc:
        report["errors"].append(_error_entry("validate", exc))

    if model is not None:
        _run_analyses(scenario, model, report, out_dir)

    report["exit_code"] = 2 if report["errors"] else 0
    with open(os.path.join(out_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, report["exit_code"]


def _run_analyses(scenario: Scenario, model: LayeredModel, report: dict,
                  out_dir: str) -> None:
    toggles = scenario.analyses

    if toggles.get("spectral"):
        try:
            report["spectral"] = spectral.reproduction_number(model).to_dict()
        except SiwsError as exc:
            report["errors"].append(_error_entry("spectral", exc))

    if toggles.get("equilibrium"):
        sub = {"healthy": None, "endemic": None}
        try:
            sub["healthy"] = equilibria.classify_healthy_state(model).to_dict()
        except SiwsError as exc:
            report["errors"].append(_error_entry("equilibrium", exc))
        try:
            sub["endemic"] = equilibria.endemic_equilibrium(model).to_dict()
        except (WrongRegime, NotIrreducible) as exc:
            # A defined outcome, not a failure: the endemic theory does
            # not apply, the run is labeled and continues.
            sub["endemic"] = {"kind": "Unclassified", "reason": str(exc)}
        except SiwsError as exc:
            report["errors"].append(_error_entry("equilibrium", exc))
        report["equilibrium"] = sub

    if toggles.get("compare"):
        try:
            report["compare"] = equilibria.compare_endemic(model).to_dict()
        except SiwsError as exc:
            report["errors"].append(_error_entry("compare", exc))

    if toggles.get("sis"):
        try:
            report["sis"] = equilibria.sis_endemic(model.pop).to_dict()
        except SiwsError as exc:
            report["errors"].append(_error_entry("sis", exc))

    if toggles.get("simulate") and scenario.initial_state is not None:
        try:
            z0 = State(x=np.array(scenario.initial_state["x"], dtype=float),
                       w=np.array(scenario.initial_state["w"], dtype=float))
            traj = simulate(model, z0, scenario.t_end,
                            SimulationControls(), samples=scenario.samples)
            csv_path = os.path.join(out_dir, f"{scenario.name}.csv")
            trajectory_to_csv(traj, csv_path)
            final = traj.zs[-1]
            report["simulate"] = {
                "t_end": scenario.t_end,
                "samples": scenario.samples,
                "csv": os.path.basename(csv_path),
                "final_x": final[:model.n].tolist(),
                "final_w": final[model.n:].tolist(),
                "final_sup_norm": float(np.max(np.abs(final))),
                "final_x_mean": float(traj.x_mean[-1]),
                "final_w_mean": float(traj.w_mean[-1]),
                "steps_accepted": traj.steps_accepted,
                "steps_rejected": traj.steps_rejected,
                "max_clamp": traj.max_clamp,
            }
        except SiwsError as exc:
            report["errors"].append(_error_entry("simulate", exc))

    observe = toggles.get("observe")
    if observe:
        opts = observe if isinstance(observe, dict) else {}
        try:
            meas = None
            if "c" in opts:
                meas = observability.MeasurementMap(
                    c_matrix=np.array(opts["c"], dtype=float))
            rep = observability.observability_report(
                model, meas=meas,
                w0=opts.get("w0"),
                order=opts.get("order"),
                samples=int(opts.get("samples", 5)),
                seed=int(opts.get("seed", scenario.seed or 0)))
            report["observe"] = rep.to_dict()
        except SiwsError as exc:
            report["errors"].append(_error_entry("observe", exc))


_TARGET_RHO = {"SubThreshold": 0.7, "SuperThreshold": 1.5}


def _sample_layers(rng: np.random.Generator, n: int, m: int, density: float):
    def mat(rows, cols):
        mask = rng.random((rows, cols)) < density
        return np.where(mask, rng.uniform(0.5, 1.5, (rows, cols)), 0.0)

    beta = mat(n, n)
    beta_w = mat(n, m)
    c_w = mat(m, n)
    flow = mat(m, m)
    np.fill_diagonal(flow, 0.0)
    alpha = flow.copy()
    np.fill_diagonal(alpha, -flow.sum(axis=0))
    delta = rng.uniform(0.5, 1.5, n)
    delta_w = rng.uniform(0.5, 1.5, m)
    return beta, delta, alpha, delta_w, beta_w, c_w


def generate_random_scenario(n: int, m: int, density: float, seed: int,
                             target: str,
                             target_rho: float | None = None) -> dict:
    """Sample an irreducible A2 model with rho placed relative to 1.

    Rejection-samples the sparsity pattern until b_f is irreducible,
    then rescales the recovery/decay rates uniformly (bisection on the
    scale factor, 40 iterations) so that rho(d_f^-1 b_f) lands at
    `target_rho` (default 0.7 below threshold, 1.5 above).
    Deterministic for a given seed.

    Returns:
        A scenario dict ready for `scenario_from_dict` / JSON dumping.

    Raises:
        GenerationFailure: 1000 consecutive reducible patterns.
    """
    if target not in _TARGET_RHO:
        raise GenerationFailure(f"unknown target '{target}'")
    if not (n >= 1 and m >= 1 and 0 < density <= 1):
        raise GenerationFailure("need n, m >= 1 and density in (0, 1]")
    rho_goal = target_rho if target_rho is not None else _TARGET_RHO[target]

    rng = np.random.default_rng(seed)
    for _ in range(1000):
        beta, delta, alpha, delta_w, beta_w, c_w = _sample_layers(
            rng, n, m, density)
        off = alpha.copy()
        np.fill_diagonal(off, 0.0)
        b_f = np.block([[beta, beta_w], [c_w, off]])
        if is_irreducible(b_f):
            break
    else:
        raise GenerationFailure(
            "1000 consecutive samples produced a reducible pattern; "
            "increase density")

    def rho_at(sigma: float) -> float:
        d = np.concatenate([sigma * delta, sigma * delta_w - np.diag(alpha)])
        return spectral.spectral_radius(b_f / d[:, None])

    lo = hi = 1.0
    for _ in range(80):
        if rho_at(hi) <= rho_goal:
            break
        hi *= 2.0
    for _ in range(80):
        if rho_at(lo) >= rho_goal:
            break
        lo *= 0.5
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if rho_at(mid) > rho_goal:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)

    x0 = rng.uniform(0.05, 0.95, n)
    w0 = rng.uniform(0.05, 1.0, m)
    return {
        "population": {"beta": beta.tolist(),
                       "delta": (sigma * delta).tolist()},
        "infrastructure": {"alpha": alpha.tolist(),
                           "delta_w": (sigma * delta_w).tolist()},
        "coupling": {"beta_w": beta_w.tolist(), "c_w": c_w.tolist()},
        "regime": "A2",
        "initial_state": {"x": x0.tolist(), "w": w0.tolist()},
        "t_end": 200.0,
        "samples": 200,
        "seed": seed,
        "analyses": {"spectral": True, "equilibrium": True,
                     "simulate": True},
    }
