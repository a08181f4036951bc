"""Fly-hover-communicate planning.

The UAV flies silently at the maximum-range speed between hover points and
talks to one node per hover. With one node the trade-off is a 1-D search over
how far to fly toward it; with several nodes the hover points are refined by
successive convex approximation around a fixed visiting order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernel
from .comms import hover_time, spectral_rate
from .rotor_power import characteristic_speeds, energy_per_meter
from .scenario import Scenario, SolverSettings
from .trajectory import DiscretizedTrajectory
from .tsp import Tour, solve_open_tour, tour_length

log = logging.getLogger(__name__)

LOG2E = 1.0 / math.log(2.0)
ETA_FLOOR = 1e-9
SINGLE_GN_GRID = 2001


class PlanningError(RuntimeError):
    """A convex subproblem could not be solved; carries the iteration and program listing."""

    def __init__(self, message, iteration=None, dump=None, trace=None, last=None):
        super().__init__(message)
        self.iteration = iteration
        self.dump = dump
        self.trace = trace or []
        self.last = last


@dataclass
class SingleGnPlan:
    D_tr: float
    hover_point: np.ndarray
    T_hov: float
    E_travel: float
    E_hover_comm: float
    E_total: float


@dataclass
class FhcPlan:
    order: Tour
    hover_points: np.ndarray  # (K, 2), row k serves node k
    hover_times: np.ndarray  # (K,)
    z: np.ndarray  # (K,) squared-radius slacks from the last subproblem
    D_tr: float
    E_travel: float
    E_hover_comm: float
    E_total: float
    mission_time: float
    V_mr: float
    trace: list = field(default_factory=list)  # subproblem objective per iteration

    @property
    def iterations(self) -> int:
        return len(self.trace)


def _speeds(sc: Scenario):
    _, V_mr = characteristic_speeds(sc.rotor, sc.V_max)
    return V_mr, float(energy_per_meter(sc.rotor, V_mr))


# ---------------------------------------------------------------- one node


def _single_gn_setup(sc: Scenario):
    if sc.K != 1:
        raise ValueError(f"single-node planning needs exactly one node, got {sc.K}")
    if sc.endpoints_enabled:
        raise ValueError("single-node planning leaves the final position free; disable endpoints")
    q_I = np.asarray(sc.q_I, float)
    gn = sc.gns[0]
    D_bar = float(np.linalg.norm(gn.pos - q_I))
    return q_I, gn, D_bar


def single_gn_energy(sc: Scenario, D, E0_star=None):
    """Total energy when flying distance D toward the node then hovering until done."""
    q_I, gn, D_bar = _single_gn_setup(sc)
    if E0_star is None:
        E0_star = _speeds(sc)[1]
    D = np.asarray(D, float)
    rest = D_bar - D
    rate = np.log2(1.0 + sc.chan.gamma0 / (sc.chan.H**2 + rest**2))
    return D * E0_star + (sc.rotor.P_h + sc.P_c) * gn.Q_norm / rate


def solve_single_gn(sc: Scenario) -> SingleGnPlan:
    """Best distance to fly toward a single node before hovering."""
    q_I, gn, D_bar = _single_gn_setup(sc)
    V_mr, E0 = _speeds(sc)
    if D_bar == 0.0:
        D = 0.0
    else:
        f = lambda d: float(single_gn_energy(sc, d, E0))  # noqa: E731
        grid = np.linspace(0.0, D_bar, SINGLE_GN_GRID)
        vals = single_gn_energy(sc, grid, E0)
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        D, best = float(grid[i]), float(vals[i])
        if hi > lo:
            r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-5})
            if r.fun < best:
                D = float(r.x)
    return _single_gn_plan(sc, D, E0)


def _single_gn_plan(sc, D, E0):
    q_I, gn, D_bar = _single_gn_setup(sc)
    hp = q_I + (gn.pos - q_I) * (D / D_bar) if D_bar > 0 else q_I.copy()
    T = float(hover_time(sc.chan, hp, gn))
    E_tr = D * E0
    E_hc = (sc.rotor.P_h + sc.P_c) * T
    return SingleGnPlan(D, hp, T, E_tr, E_hc, E_tr + E_hc)


def low_snr_threshold(sc: Scenario) -> float:
    """Target (bits/Hz) below which the low-SNR optimum is to stay at the start."""
    _, gn, D_bar = _single_gn_setup(sc)
    _, E0 = _speeds(sc)
    if D_bar == 0:
        return math.inf
    return sc.chan.gamma0 * E0 / (2 * math.log(2) * (sc.rotor.P_h + sc.P_c) * D_bar)


def low_snr_closed_form(sc: Scenario) -> float:
    """Travel distance under the low-SNR rate approximation log2(1+x) ~ x log2(e)."""
    _, gn, D_bar = _single_gn_setup(sc)
    _, E0 = _speeds(sc)
    back = sc.chan.gamma0 * E0 / (2 * math.log(2) * (sc.rotor.P_h + sc.P_c) * gn.Q_norm)
    return max(0.0, D_bar - back)


# ---------------------------------------------------------------- many nodes


def rate_slope(chan, z):
    """Derivative of log2(1 + gamma0/(H^2+z)) with respect to z."""
    a = chan.H**2 + np.asarray(z, float)
    return -chan.gamma0 * LOG2E / (a * (a + chan.gamma0))


def _rate_of_z(chan, z):
    return np.log2(1.0 + chan.gamma0 / (chan.H**2 + np.asarray(z, float)))


def hover_plan_from_points(sc: Scenario, order: Tour, hp, z=None, trace=None) -> FhcPlan:
    """Exact energy bookkeeping for fixed hover points visited in ``order``."""
    hp = np.asarray(hp, float).reshape(sc.K, 2)
    V_mr, E0 = _speeds(sc)
    T = np.array([float(hover_time(sc.chan, hp[k], g)) for k, g in enumerate(sc.gns)])
    D = tour_length(order.order, hp, sc.q_I, sc.q_final)
    E_tr = D * E0
    E_hc = float((sc.rotor.P_h + sc.P_c) * np.sum(T))
    zz = np.sum((hp - sc.gn_positions) ** 2, axis=1) if z is None else np.asarray(z, float)
    return FhcPlan(order, hp, T, zz, D, E_tr, E_hc, E_tr + E_hc, D / V_mr + float(np.sum(T)),
                   V_mr, list(trace or []))


def build_hover_subproblem(sc: Scenario, order: Tour, hp_l, z_l, E0):
    """Convex restriction around hover points ``hp_l`` with squared radii ``z_l``."""
    K = sc.K
    W = sc.gn_positions
    prog = kernel.ConvexProgram()
    L = tour_length(order.order, hp_l, sc.q_I, sc.q_final)
    D = prog.variable("D", (), lb=0.0, init=L * (1 + 1e-3) + 1e-3 * (1 + L) + 1.0)
    q = prog.variable("q", (K, 2), init=hp_l)
    z = prog.variable("z", (K,), init=np.maximum(z_l, 0.0) + 1e-3)
    eta = prog.variable("eta", (K,), lb=ETA_FLOOR)
    R0 = _rate_of_z(sc.chan, z_l)
    rho = rate_slope(sc.chan, z_l)
    prog.set_init(eta, np.maximum(0.5 * R0, 2 * ETA_FLOOR))
    Q = np.array([g.Q_norm for g in sc.gns])
    prog.minimize(D.all * E0, kernel.reciprocal(eta.all, (sc.rotor.P_h + sc.P_c) * Q))

    idx = list(order.order)
    qx, qy = q[:, 0], q[:, 1]
    start = np.asarray(sc.q_I, float)
    xs = [kernel.Affine.constant([start[0]])] + [qx[[i]] for i in idx]
    ys = [kernel.Affine.constant([start[1]])] + [qy[[i]] for i in idx]
    if sc.q_final is not None:
        xs.append(kernel.Affine.constant([sc.q_final[0]]))
        ys.append(kernel.Affine.constant([sc.q_final[1]]))
    X, Y = kernel.Affine.concat(xs), kernel.Affine.concat(ys)
    n = X.size
    legs = [X[1:n] - X[0 : n - 1], Y[1:n] - Y[0 : n - 1]]
    prog.sum_norms_leq(legs, D.all, label="legs")
    prog.sqnorm_leq([qx - W[:, 0], qy - W[:, 1]], z.all, label="radius")
    prog.affine_leq(eta.all - z.all * rho, R0 - rho * z_l, label="rate")
    return prog


def solve_multi_gn(sc: Scenario, settings: SolverSettings | None = None, init: str = "above") -> FhcPlan:
    """Hover points for all nodes by successive convex approximation.

    ``init`` picks the starting hover points: "above" (each node's position),
    "center" (the nodes' centroid) or "best" (run both, keep the cheaper plan).
    """
    settings = settings or SolverSettings()
    if init == "best":
        plans = [solve_multi_gn(sc, settings, i) for i in ("above", "center")]
        return min(plans, key=lambda p: p.E_total)
    W = sc.gn_positions
    if init == "above":
        hp = W.copy()
    elif init == "center":
        hp = np.repeat(W.mean(axis=0, keepdims=True), sc.K, axis=0)
    else:
        raise ValueError(f"unknown initialization {init!r}")
    order = solve_open_tour(W, sc.q_I, sc.q_final, seed=settings.rng_seed, restarts=settings.tsp_restarts)
    _, E0 = _speeds(sc)
    # squared distance, so the rate expansion point matches the hover point
    z_l = np.sum((hp - W) ** 2, axis=1)
    trace = []
    prev = None
    for it in range(settings.max_sca_iters):
        prog = build_hover_subproblem(sc, order, hp, z_l, E0)
        sol = kernel.solve(prog, settings)
        if sol.status != "optimal":
            raise PlanningError(
                f"hover subproblem {sol.status} at iteration {it}", it, prog.dump(), trace,
                hover_plan_from_points(sc, order, hp, z_l, trace),
            )
        obj = sol.objective
        if prev is not None and obj > prev:
            # the previous point stays feasible, so any rise is solver tolerance
            log.debug("hover SCA objective rose by %.3e at iteration %d", obj - prev, it)
            obj = min(obj, prev)
        trace.append(obj)
        hp = sol.values["q"].reshape(sc.K, 2)
        z_l = np.sum((hp - W) ** 2, axis=1)
        if prev is not None and (prev - obj) / abs(prev) < settings.epsilon_sca:
            break
        prev = obj
    return hover_plan_from_points(sc, order, hp, sol.values["z"], trace)


def fhc_to_trajectory(plan: FhcPlan, sc: Scenario, delta_max: float) -> DiscretizedTrajectory:
    """Waypoints, durations and allocations realizing a hover plan.

    Legs are split into equal pieces no longer than ``delta_max`` and flown at
    the maximum-range speed; each hover is a zero-length segment whose whole
    duration goes to its node.
    """
    K = sc.K
    pts = [np.asarray(sc.q_I, float)]
    T = []
    tau = []

    def fly_to(target):
        a = pts[-1]
        L = float(np.linalg.norm(target - a))
        n = math.ceil(L / delta_max * (1 - 1e-12)) if L > 0 else 0
        for j in range(1, n + 1):
            pts.append(a + (target - a) * (j / n))
            T.append(L / n / plan.V_mr)
            tau.append(np.zeros(K))

    for k in plan.order.order:
        fly_to(plan.hover_points[k])
        pts.append(plan.hover_points[k].copy())
        T.append(float(plan.hover_times[k]))
        row = np.zeros(K)
        row[k] = plan.hover_times[k]
        tau.append(row)
    if sc.q_final is not None:
        fly_to(np.asarray(sc.q_final, float))
    return DiscretizedTrajectory(np.array(pts), np.array(T), np.array(tau).reshape(-1, K))


def rates_along(sc: Scenario, waypoints) -> np.ndarray:
    """Spectral rate to every node from every waypoint, shape (n, K)."""
    return np.stack([spectral_rate(sc.chan, waypoints, g) for g in sc.gns], axis=1)
