"""Benchmark schemes and throughput sweeps.

Every scheme is turned into a discretized trajectory and scored by the
evaluator, so all rows are computed with the same exact expressions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import fhc, joint
from .evaluator import evaluate
from .scenario import Scenario, SolverSettings
from .tsp import Tour, solve_open_tour

log = logging.getLogger(__name__)

SCHEMES = ("geometric-center", "above-gns", "fhc", "joint-energy", "joint-time")


@dataclass
class SchemeResult:
    scheme: str
    energy: float  # J
    time: float  # s
    status: str  # "ok", "infeasible" or an error message
    trajectory: object = None

    def row(self, Q_bits=None) -> dict:
        d = {"scheme": self.scheme, "energy_J": self.energy, "time_s": self.time, "status": self.status}
        if Q_bits is not None:
            d = {"Q_bits": Q_bits, **d}
        return d


def geometric_center_plan(sc: Scenario) -> fhc.FhcPlan:
    """Hover once at the centroid of the nodes and serve them all from there."""
    c = sc.gn_positions.mean(axis=0)
    hp = np.repeat(c[None, :], sc.K, axis=0)
    return fhc.hover_plan_from_points(sc, Tour(tuple(range(sc.K)), 0.0), hp)


def above_gns_plan(sc: Scenario, settings: SolverSettings) -> fhc.FhcPlan:
    """Hover directly above each node, visiting them in the shortest open-tour order."""
    W = sc.gn_positions
    order = solve_open_tour(W, sc.q_I, sc.q_final, seed=settings.rng_seed, restarts=settings.tsp_restarts)
    return fhc.hover_plan_from_points(sc, order, W)


def _score(name, traj, sc, settings) -> SchemeResult:
    rep = evaluate(traj, sc, settings)
    status = "ok" if rep.feasible else "infeasible: " + "; ".join(str(v) for v in rep.violations[:3])
    return SchemeResult(name, rep.total, rep.mission_time, status, traj)


def _failed(name, err) -> SchemeResult:
    log.warning("%s failed: %s", name, err)
    return SchemeResult(name, float("nan"), float("nan"), f"error: {err}")


def run_benchmarks(sc: Scenario, settings: SolverSettings | None = None, schemes=SCHEMES) -> list[SchemeResult]:
    """Score the requested schemes on one scenario; planner failures become error rows."""
    settings = settings or SolverSettings()
    unknown = set(schemes) - set(SCHEMES)
    if unknown:
        raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
    out = []
    plan = None
    for name in schemes:
        try:
            if name == "geometric-center":
                traj = fhc.fhc_to_trajectory(geometric_center_plan(sc), sc, settings.delta_max)
            elif name == "above-gns":
                traj = fhc.fhc_to_trajectory(above_gns_plan(sc, settings), sc, settings.delta_max)
            else:
                if plan is None:
                    plan = fhc.solve_multi_gn(sc, settings)
                if name == "fhc":
                    traj = fhc.fhc_to_trajectory(plan, sc, settings.delta_max)
                else:
                    kind = "energy" if name == "joint-energy" else "time"
                    init = joint.init_from_fhc(sc, settings, plan)
                    traj, _ = joint.optimize(sc, settings, kind, init)
            out.append(_score(name, traj, sc, settings))
        except (fhc.PlanningError, ValueError, ArithmeticError) as e:
            out.append(_failed(name, e))
    return out


def sweep(sc: Scenario, Q_values, settings: SolverSettings | None = None, schemes=SCHEMES) -> list[dict]:
    """Rows (Q_bits, scheme, energy_J, time_s, status) for every target and scheme."""
    Q_values = [float(q) for q in Q_values]
    if not Q_values or any(not q > 0 for q in Q_values):
        raise ValueError("Q_values must be a nonempty list of positive throughputs")
    rows = []
    for Q in Q_values:
        log.info("sweep point Q = %.6g bits", Q)
        for r in run_benchmarks(sc.with_targets(Q), settings, schemes):
            rows.append(r.row(Q))
    return rows
