"""Command-line front end: ``uavplan VERB [options]``.

Every verb writes plain CSV/JSON into ``--out`` with units in the column
names. Numbers are printed with 12 significant digits so repeated runs with
the same seed produce identical files.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments, fhc, joint, rotor_power
from .evaluator import evaluate
from .scenario import (
    ScenarioError,
    SolverSettings,
    apply_overrides,
    default_scenario,
    read_raw,
    scenario_from_dict,
    scenario_to_dict,
)
from .trajectory import FMT, DiscretizedTrajectory
from .tsp import solve_open_tour

log = logging.getLogger("uavplan")

VERBS = ("power-curve", "speeds", "route", "plan-fhc", "plan-joint", "plan-time-min",
         "evaluate", "sweep", "compare")
DEFAULT_Q_VALUES = "5e6,10e6,20e6,50e6,100e6,200e6"


class CliError(Exception):
    pass


def _num(v):
    if isinstance(v, (float, np.floating)):
        return float(FMT % v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([FMT % v if isinstance(v, (float, np.floating)) else v for v in r])


def write_json(path: Path, data):
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [clean(v) for v in o]
        return _num(o)

    path.write_text(json.dumps(clean(data), indent=2) + "\n")


def load(args):
    """Scenario and settings from --scenario (or the built-in default) plus overrides and flags."""
    if args.scenario:
        data = read_raw(args.scenario)
    else:
        data = scenario_to_dict(default_scenario())
    data = apply_overrides(data, args.set or [])
    sc, settings = scenario_from_dict(data)
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.epsilon is not None:
        changes["epsilon_sca"] = args.epsilon
    if args.delta_max is not None:
        changes["delta_max"] = args.delta_max
    if changes:
        settings = dataclasses.replace(settings, **changes)
    return sc, settings


# ---------------------------------------------------------------- verbs


def cmd_power_curve(args, out: Path):
    sc, _ = load(args)
    V = np.arange(0.0, sc.V_max + 0.5 * args.step, args.step)
    blade, induced, parasite = rotor_power.power_components(sc.rotor, V)
    rows = zip(V, blade + induced + parasite, blade, induced, parasite)
    write_csv(out / "power_curve.csv",
              ["V_mps", "P_total_W", "P_blade_W", "P_induced_W", "P_parasite_W"], rows)
    return 0


def cmd_speeds(args, out: Path):
    sc, _ = load(args)
    V_me, V_mr = rotor_power.characteristic_speeds(sc.rotor, sc.V_max)
    data = {
        "V_me_mps": V_me,
        "V_mr_mps": V_mr,
        "E0_star_J_per_m": float(rotor_power.energy_per_meter(sc.rotor, V_mr)),
        "P_hover_W": sc.rotor.P_h,
    }
    write_json(out / "speeds.json", data)
    print(json.dumps({k: _num(v) for k, v in data.items()}))
    return 0


def cmd_route(args, out: Path):
    sc, settings = load(args)
    tour = solve_open_tour(sc.gn_positions, sc.q_I, sc.q_final, settings.rng_seed, settings.tsp_restarts)
    W = sc.gn_positions
    write_csv(out / "route.csv", ["visit", "gn", "x_m", "y_m"],
              [(i + 1, k + 1, W[k, 0], W[k, 1]) for i, k in enumerate(tour.order)])
    write_json(out / "summary.json", {"order": [k + 1 for k in tour.order], "length_m": tour.length})
    return 0


def _report(traj, sc, settings, out: Path, extra: dict):
    traj.write_csv(out / "trajectory.csv")
    rep = evaluate(traj, sc, settings)
    write_json(out / "summary.json", {**extra, **rep.as_dict(), "segments": traj.n_segments})
    if not rep.feasible:
        for v in rep.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    return 0


def cmd_plan_fhc(args, out: Path):
    sc, settings = load(args)
    plan = fhc.solve_multi_gn(sc, settings)
    write_csv(out / "trace.csv", ["iteration", "objective_J"],
              [(i + 1, v) for i, v in enumerate(plan.trace)])
    write_csv(out / "hover_points.csv", ["visit", "gn", "x_m", "y_m", "hover_s"],
              [(i + 1, k + 1, *plan.hover_points[k], plan.hover_times[k]) for i, k in enumerate(plan.order.order)])
    traj = fhc.fhc_to_trajectory(plan, sc, settings.delta_max)
    return _report(traj, sc, settings, out, {
        "scheme": "fhc", "status": "ok", "iterations": plan.iterations,
        "travel_distance_m": plan.D_tr, "plan_energy_J": plan.E_total,
    })


def _plan_joint(args, out: Path, kind: str):
    sc, settings = load(args)
    try:
        traj, trace = joint.optimize(sc, settings, kind)
    except fhc.PlanningError as e:
        if e.last is not None:
            e.last.write_csv(out / "trajectory_partial.csv")
        write_json(out / "summary.json", {"scheme": f"joint-{kind}", "status": f"error: {e}",
                                          "iterations": e.iteration})
        (out / "failed_program.txt").write_text(e.dump or "")
        raise
    write_csv(out / "trace.csv", ["iteration", "subproblem_objective", "exact_objective"],
              [(r.iteration, r.subproblem, r.exact) for r in trace])
    unit = "J" if kind == "energy" else "s"
    return _report(traj, sc, settings, out, {
        "scheme": f"joint-{kind}", "status": "ok", "objective_unit": unit,
        "iterations": len(trace), "final_subproblem_objective": trace[-1].subproblem,
    })


def cmd_plan_joint(args, out: Path):
    return _plan_joint(args, out, args.objective)


def cmd_plan_time_min(args, out: Path):
    return _plan_joint(args, out, "time")


def cmd_evaluate(args, out: Path):
    sc, settings = load(args)
    if not args.trajectory:
        raise CliError("evaluate needs --trajectory PATH")
    try:
        traj = DiscretizedTrajectory.read_csv(args.trajectory)
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read trajectory: {e}") from None
    rep = evaluate(traj, sc, settings)
    write_json(out / "evaluation.json", rep.as_dict())
    print(json.dumps({k: _num(v) for k, v in rep.as_dict().items() if not isinstance(v, list)}))
    for v in rep.violations:
        print(f"violation: {v}", file=sys.stderr)
    return 0 if rep.feasible else 1


def cmd_sweep(args, out: Path):
    sc, settings = load(args)
    try:
        Q = [float(v) for v in args.q_values.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--q-values must be comma-separated numbers, got {args.q_values!r}") from None
    rows = experiments.sweep(sc, Q, settings)
    write_csv(out / "sweep.csv", ["Q_bits", "scheme", "energy_J", "time_s", "status"],
              [(r["Q_bits"], r["scheme"], r["energy_J"], r["time_s"], r["status"]) for r in rows])
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_compare(args, out: Path):
    sc, settings = load(args)
    res = experiments.run_benchmarks(sc, settings)
    write_csv(out / "compare.csv", ["scheme", "energy_J", "time_s", "status"],
              [(r.scheme, r.energy, r.time, r.status) for r in res])
    for r in res:
        print(f"{r.scheme:18s} {FMT % r.energy:>14s} J {FMT % r.time:>14s} s  {r.status}")
    return 0 if all(r.status == "ok" for r in res) else 1


COMMANDS = {
    "power-curve": cmd_power_curve,
    "speeds": cmd_speeds,
    "route": cmd_route,
    "plan-fhc": cmd_plan_fhc,
    "plan-joint": cmd_plan_joint,
    "plan-time-min": cmd_plan_time_min,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavplan", description="Energy-aware UAV trajectory and communication planning.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--scenario", help="scenario YAML file (default: built-in three-node layout)")
    p.add_argument("--out", default="out", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, help="random seed for the tour search")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario field (repeatable)")
    p.add_argument("--epsilon", type=float, help="SCA stopping threshold on fractional decrease")
    p.add_argument("--delta-max", type=float, help="maximum segment length, m")
    p.add_argument("--objective", choices=joint.OBJECTIVES, default="energy", help="plan-joint objective")
    p.add_argument("--q-values", default=DEFAULT_Q_VALUES, help="sweep targets in bits, comma separated")
    p.add_argument("--trajectory", help="trajectory CSV to evaluate")
    p.add_argument("--step", type=float, default=0.5, help="power-curve speed step, m/s")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.verb](args, out)
    except (ScenarioError, CliError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except fhc.PlanningError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
