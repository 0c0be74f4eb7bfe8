"""Command-line front end for scenario runs and single analyses.

Exit codes: 0 success, 1 parse/config errors, 2 hypothesis violations
or module errors encountered while running analyses (reported, not
crashed).  The default output directory comes from SIWS_OUT_DIR when
set.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import equilibria, observability, spectral
from .dynamics import SimulationControls, simulate, trajectory_to_csv
from .errors import (BracketFailure, HypothesisViolated, NotIrreducible,
                     ParseError, PreconditionViolated, SiwsError, WrongRegime)
from .model import State
from .scenario import generate_random_scenario, load_scenario, run_scenario
from .spectral import is_irreducible

_VIOLATIONS = (HypothesisViolated, WrongRegime, NotIrreducible,
               BracketFailure, PreconditionViolated)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load(args):
    scenario = load_scenario(args.config)
    return scenario, scenario.build_model()


def _cmd_validate(args) -> int:
    _, model = _load(args)
    _print_json({
        "n": model.n,
        "m": model.m,
        "regime": model.regime.value,
        "satisfies_a1": model.satisfies_a1,
        "satisfies_a2": model.satisfies_a2,
        "irreducible": is_irreducible(model.b_f),
    })
    return 0


def _cmd_spectral(args) -> int:
    _, model = _load(args)
    _print_json(spectral.reproduction_number(model).to_dict())
    return 0


def _cmd_simulate(args) -> int:
    scenario, model = _load(args)
    if scenario.initial_state is None:
        raise ParseError("scenario has no initial_state to simulate from")
    z0 = State(x=np.array(scenario.initial_state["x"], dtype=float),
               w=np.array(scenario.initial_state["w"], dtype=float))
    t_end = args.t_end if args.t_end is not None else scenario.t_end
    samples = args.samples if args.samples is not None else scenario.samples
    traj = simulate(model, z0, t_end, SimulationControls(), samples=samples)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"{scenario.name}.csv")
    trajectory_to_csv(traj, csv_path)
    _print_json({
        "csv": csv_path,
        "t_end": t_end,
        "samples": samples,
        "final_sup_norm": float(np.max(np.abs(traj.zs[-1]))),
        "steps_accepted": traj.steps_accepted,
        "steps_rejected": traj.steps_rejected,
        "max_clamp": traj.max_clamp,
    })
    return 0


def _cmd_equilibrium(args) -> int:
    _, model = _load(args)
    result = equilibria.endemic_equilibrium(model)
    _print_json(result.to_dict())
    return 0


def _cmd_compare(args) -> int:
    _, model = _load(args)
    _print_json(equilibria.compare_endemic(model).to_dict())
    return 0


def _cmd_observe(args) -> int:
    scenario, model = _load(args)
    w0 = None
    if args.w0:
        w0 = np.array([float(v) for v in args.w0.split(",")], dtype=float)
    seed = args.seed if args.seed is not None else (scenario.seed or 0)
    report = observability.observability_report(
        model, w0=w0, order=args.order, samples=args.samples, seed=seed)
    _print_json(report.to_dict())
    return 0


def _cmd_run(args) -> int:
    if args.batch:
        paths = sorted(glob.glob(os.path.join(args.batch, "*.json")))
        if not paths:
            raise ParseError(f"no scenario files in {args.batch}")
        worst = 0
        for path in paths:
            scenario = load_scenario(path)
            out_dir = os.path.join(args.out, scenario.name)
            report, code = run_scenario(scenario, out_dir)
            print(f"{scenario.name}: exit {code} "
                  f"({len(report['errors'])} errors)")
            worst = max(worst, code)
        return worst
    if not args.config:
        raise ParseError("run requires --config or --batch")
    report, code = run_scenario(args.config, args.out)
    _print_json(report)
    return code


def _cmd_gen(args) -> int:
    if args.seed is None:
        raise ParseError("gen requires --seed (scenarios must be reproducible)")
    cfg = generate_random_scenario(args.n, args.m, args.density, args.seed,
                                   args.target, target_rho=args.target_rho)
    os.makedirs(args.out, exist_ok=True)
    path = args.file or os.path.join(
        args.out, f"scenario_{args.target.lower()}_{args.seed}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siws",
        description="Layered networked SIWS model: simulation, spectral "
                    "thresholds, endemic equilibria, observability.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--out", default=os.environ.get("SIWS_OUT_DIR", "."),
        help="output directory (default: $SIWS_OUT_DIR or '.')")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized analyses")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, config=True):
        p = sub.add_parser(name, help=help_, parents=[common])
        if config:
            p.add_argument("--config", required=True,
                           help="scenario/model JSON file")
        return p

    add("validate", "validate a model file")
    add("spectral", "threshold analysis")

    p = add("simulate", "integrate a trajectory")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)

    add("equilibrium", "endemic equilibrium")
    add("compare", "coupled vs population-only endemic levels")

    p = add("observe", "observability rank analysis")
    p.add_argument("--order", type=int, default=None,
                   help="highest derivative order (default n+m)")
    p.add_argument("--w0", default=None,
                   help="comma-separated contamination level")
    p.add_argument("--samples", type=int, default=5,
                   help="random w re-draws for the generic-rank verdict")

    p = add("run", "run a full scenario (or a batch)", config=False)
    p.add_argument("--config", default=None, help="scenario JSON file")
    p.add_argument("--batch", default=None,
                   help="directory of scenario JSON files")

    p = add("gen", "generate a random scenario", config=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--target", choices=["SubThreshold", "SuperThreshold"],
                   required=True)
    p.add_argument("--target-rho", type=float, default=None)
    p.add_argument("--file", default=None, help="explicit output path")
    return parser


_COMMANDS = {
    "validate": _cmd_validate,
    "spectral": _cmd_spectral,
    "simulate": _cmd_simulate,
    "equilibrium": _cmd_equilibrium,
    "compare": _cmd_compare,
    "observe": _cmd_observe,
    "run": _cmd_run,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _VIOLATIONS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         indent=2), file=sys.stderr)
        return 2
    except SiwsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
