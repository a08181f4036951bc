"""Joint trajectory and communication design over a path-discretized trajectory.

The trajectory is a chain of straight segments, each with its own duration
and time-division allocation among the nodes. Segment lengths are capped so
the rate to each node can be treated as constant along a segment. The two
non-convex pieces (induced power and the throughput targets) are handled with
slack variables whose awkward sides are replaced by global lower bounds
around the current iterate. Every convex restriction is then solved with the
barrier kernel.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .evaluator import exact_energy
from .fhc import LOG2E, PlanningError, rates_along, solve_multi_gn
from .scenario import Scenario, SolverSettings
from .trajectory import DiscretizedTrajectory

log = logging.getLogger(__name__)

T_FLOOR = 1e-3  # s
Y_FLOOR = 1e-6
TAU_FLOOR = 1e-6  # s
BISECT_RES = 1e-3  # s
BISECT_MAX = 1e7  # s
OBJECTIVES = ("energy", "time")


@dataclass
class SlackState:
    y: np.ndarray  # (M+1,)
    A: np.ndarray  # (M+1, K)


@dataclass
class TraceRow:
    iteration: int
    subproblem: float
    exact: float


def induced_slack(delta, T, v0):
    """y with y^2 = sqrt(T^4 + delta^4/(4 v0^4)) - delta^2/(2 v0^2)."""
    a = np.asarray(delta, float) ** 2 / (2 * v0**2)
    T = np.asarray(T, float)
    return np.sqrt(T**4 / (np.sqrt(T**4 + a * a) + a))


def compute_slacks(traj: DiscretizedTrajectory, sc: Scenario) -> SlackState:
    y = induced_slack(traj.deltas, traj.T, sc.rotor.v0)
    r = rates_along(sc, traj.waypoints[:-1])
    A = np.sqrt(np.maximum(traj.tau, 0.0) * r)
    return SlackState(y, A)


def exact_objective(traj: DiscretizedTrajectory, sc: Scenario, kind: str) -> float:
    if kind == "time":
        return traj.mission_time
    return exact_energy(traj, sc.rotor, sc.P_c)[2]


# ---------------------------------------------------------------- initialization


def _split_counts(lengths, total, delta_max):
    """Segments per leg: at least ceil(L/delta_max), extras spread in proportion to length."""
    lengths = np.asarray(lengths, float)
    need = np.array([math.ceil(L / delta_max * (1 - 1e-12)) if L > 0 else 0 for L in lengths])
    extra = total - int(need.sum())
    if extra <= 0 or lengths.sum() == 0:
        return need
    share = extra * lengths / lengths.sum()
    add = np.floor(share).astype(int)
    left = extra - int(add.sum())
    for i in np.argsort(-(share - add), kind="stable")[:left]:
        add[i] += 1
    return need + add


def discretize_plan_path(plan, sc: Scenario, delta_max: float, margin: float = 2.0):
    """Waypoints along the hover plan's path with M = ceil(margin * length / delta_max).

    Each hover point is kept as a repeated waypoint (a zero-length segment).
    Returns waypoints of shape (M+2, 2).
    """
    stops = [np.asarray(sc.q_I, float)] + [plan.hover_points[k] for k in plan.order.order]
    if sc.q_final is not None:
        stops.append(np.asarray(sc.q_final, float))
    stops = np.array(stops)
    legs = np.linalg.norm(np.diff(stops, axis=0), axis=1)
    D_hat = margin * float(legs.sum())
    M = math.ceil(D_hat / delta_max)
    n_hover = sc.K
    flights = max(M + 1 - n_hover, 0)
    counts = _split_counts(legs, flights, delta_max)
    pts = [stops[0]]
    for i, n in enumerate(counts):
        a, b = stops[i], stops[i + 1]
        for j in range(1, n + 1):
            pts.append(a + (b - a) * (j / n))
        if i < n_hover:
            # arriving at a hover point: repeat it once
            pts.append(b.copy())
    return np.array(pts)


def uniform_duration(rates: np.ndarray, Q_norm: np.ndarray, deltas: np.ndarray, V_max: float,
                     res: float = BISECT_RES) -> float:
    """Smallest common segment duration (to ``res``) meeting every target with an equal split."""
    K = rates.shape[1]
    col = rates.sum(axis=0)

    def ok(T):
        return bool(np.all(T / K * col >= Q_norm) and np.all(deltas <= T * V_max))

    lo, hi = 0.0, 1.0
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi > BISECT_MAX:
            raise PlanningError(f"no uniform segment duration below {BISECT_MAX:g} s meets the targets")
    while hi - lo > res:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def init_from_fhc(sc: Scenario, settings: SolverSettings | None = None, plan=None) -> DiscretizedTrajectory:
    """Starting trajectory: the hover plan's path with uniform durations and equal allocations."""
    settings = settings or SolverSettings()
    if plan is None:
        plan = solve_multi_gn(sc, settings)
    wp = discretize_plan_path(plan, sc, settings.delta_max, settings.path_margin)
    n = len(wp) - 1
    rates = rates_along(sc, wp[:-1])
    deltas = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    Q = np.array([g.Q_norm for g in sc.gns])
    T_bar = max(uniform_duration(rates, Q, deltas, sc.V_max), T_FLOOR)
    return DiscretizedTrajectory(wp, np.full(n, T_bar), np.full((n, sc.K), T_bar / sc.K))


# ---------------------------------------------------------------- subproblem


def rate_tangent(chan, z):
    """Rate at squared distance z and minus its slope; the tangent is a global lower bound."""
    a = chan.H**2 + np.asarray(z, float)
    R0 = np.log2(1.0 + chan.gamma0 / a)
    beta = LOG2E * chan.gamma0 / (a * (a + chan.gamma0))
    return R0, beta


def build_subproblem(traj: DiscretizedTrajectory, slacks: SlackState, sc: Scenario,
                     settings: SolverSettings | None = None, objective_kind: str = "energy"):
    """Convex restriction of the discretized problem around ``traj``."""
    settings = settings or SolverSettings()
    if objective_kind not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective_kind!r}")
    n = traj.n_segments
    K = sc.K
    if traj.K != K or slacks.A.shape != (n, K) or slacks.y.shape != (n,):
        raise ValueError(
            f"dimension mismatch: trajectory {n} segments x {traj.K} nodes, "
            f"slacks y{slacks.y.shape} A{slacks.A.shape}, scenario K={K}"
        )
    rot, chan = sc.rotor, sc.chan
    wp_l = traj.waypoints
    free_end = sc.q_final is None
    n_free = n - 1 + (1 if free_end else 0)

    prog = kernel.ConvexProgram()
    q = prog.variable("q", (n_free, 2), init=wp_l[1 : 1 + n_free])
    T = prog.variable("T", (n,), lb=T_FLOOR, init=np.maximum(traj.T, 2 * T_FLOOR))
    tau = prog.variable("tau", (n, K), lb=TAU_FLOOR, init=np.maximum(traj.tau, 2 * TAU_FLOOR))
    A = prog.variable("A", (n, K), init=slacks.A)

    def coord(j):
        parts = [kernel.Affine.constant([wp_l[0, j]]), q[:, j]]
        if not free_end:
            parts.append(kernel.Affine.constant([wp_l[-1, j]]))
        return kernel.Affine.concat(parts)

    X, Y = coord(0), coord(1)
    ux = X[1 : n + 1] - X[0:n]
    uy = Y[1 : n + 1] - Y[0:n]
    Tall = T.all

    if objective_kind == "energy":
        y = prog.variable("y", (n,), lb=Y_FLOOR, init=np.maximum(slacks.y, 2 * Y_FLOOR))
        prog.minimize(
            Tall * rot.P0,
            kernel.quad_over_lin([ux, uy], Tall, 3 * rot.P0 / rot.U_tip**2),
            y.all * rot.Pi,
            kernel.cubic_over_quad([ux, uy], Tall, rot.parasite_coef),
            tau.all * sc.P_c,
        )
        # T^4/y^2 <= y_l^2 + 2 y_l (y - y_l) - |d_l|^2/v0^2 + 2 d_l.u / v0^2
        d_l = np.diff(wp_l, axis=0)
        yl = slacks.y
        v2 = rot.v0**2
        rhs = (y.all * (2 * yl) + ux * (2 * d_l[:, 0] / v2) + uy * (2 * d_l[:, 1] / v2)
               - (yl**2 + np.sum(d_l**2, axis=1) / v2))
        prog.fos_leq(Tall, y.all, rhs, label="induced")
    else:
        prog.minimize(Tall)

    prog.sqnorm_leq([ux, uy], kernel.Affine.constant(np.full(n, settings.delta_max**2)), label="segment cap")
    prog.norm_leq([ux, uy], Tall * sc.V_max, label="speed cap")
    # sum_k tau_mk <= T_m
    S = tau.all
    rows = np.repeat(np.arange(n), K)
    tau_sum = kernel.Affine(rows[S.rows], S.cols, S.vals, np.zeros(n))
    prog.affine_leq(tau_sum - Tall, 0.0, label="allocation")

    # A^2/tau + beta |q_m - w|^2 <= R0 + beta z0, one row per (m, k)
    W = sc.gn_positions
    z0 = np.sum((wp_l[:n, None, :] - W[None, :, :]) ** 2, axis=2)  # (n, K)
    R0, beta = rate_tangent(chan, z0)
    mm = np.repeat(np.arange(n), K)
    kk = np.tile(np.arange(K), n)
    dx = X[mm] - W[kk, 0]
    dy = Y[mm] - W[kk, 1]
    prog.convex_leq(
        [kernel.quad_over_lin([A.all], tau.all), kernel.sq_norm([dx, dy], beta.ravel())],
        (R0 + beta * z0).ravel(),
        label="rate",
    )
    # sum_m (2 A_l A - A_l^2) >= Q_k
    Al = slacks.A
    Q = np.array([g.Q_norm for g in sc.gns])
    Aa = A.all * (2 * Al).ravel()
    thr = kernel.Affine(kk[Aa.rows], Aa.cols, Aa.vals, np.zeros(K))
    prog.affine_leq(-thr, -(Q + np.sum(Al**2, axis=0)), label="throughput")
    return prog


def trajectory_from_solution(values: dict, traj_l: DiscretizedTrajectory, sc: Scenario) -> DiscretizedTrajectory:
    n = traj_l.n_segments
    wp = traj_l.waypoints.copy()
    qv = values["q"].reshape(-1, 2)
    wp[1 : 1 + len(qv)] = qv
    return DiscretizedTrajectory(wp, values["T"].reshape(n), values["tau"].reshape(n, sc.K))


# ---------------------------------------------------------------- SCA loop


def optimize(sc: Scenario, settings: SolverSettings | None = None, objective_kind: str = "energy",
             init: DiscretizedTrajectory | None = None):
    """Successive convex approximation from the hover-plan start.

    Returns (trajectory, trace) where trace rows hold the subproblem optimum
    and the exact objective of each iterate.
    """
    settings = settings or SolverSettings()
    if objective_kind not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective_kind!r}")
    traj = init if init is not None else init_from_fhc(sc, settings)
    trace: list[TraceRow] = []
    prev = None
    for it in range(1, settings.max_sca_iters + 1):
        slacks = compute_slacks(traj, sc)
        prog = build_subproblem(traj, slacks, sc, settings, objective_kind)
        sol = kernel.solve(prog, settings)
        if sol.status != "optimal":
            raise PlanningError(
                f"trajectory subproblem {sol.status} at iteration {it}", it, prog.dump(), trace, traj
            )
        traj = trajectory_from_solution(sol.values, traj, sc)
        if traj.path_length >= 0.999 * settings.delta_max * traj.n_segments:
            log.warning("iteration %d uses the whole waypoint budget; consider a larger path_margin", it)
        obj = sol.objective
        trace.append(TraceRow(it, obj, exact_objective(traj, sc, objective_kind)))
        log.debug("SCA %d: subproblem %.6f exact %.6f", it, obj, trace[-1].exact)
        if prev is not None and (prev - obj) / abs(prev) < settings.epsilon_sca:
            break
        prev = obj
    return traj, trace
