"""Exact energy, throughput and feasibility of a discretized trajectory.

Everything here is recomputed from the physical constants and the trajectory
itself, so it can serve as a check on any planner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comms import throughput
from .rotor_power import RotorParams
from .trajectory import DiscretizedTrajectory

# relative slack allowed on the throughput targets
THROUGHPUT_RTOL = 1e-6
# relative slack on geometric caps (CSV round trips keep 12 digits)
GEOM_RTOL = 1e-9


@dataclass
class EvaluationReport:
    propulsion: float  # J
    communication: float  # J
    total: float  # J
    mission_time: float  # s
    delivered_bits: list
    violations: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "total_energy_J": self.total,
            "propulsion_energy_J": self.propulsion,
            "communication_energy_J": self.communication,
            "mission_time_s": self.mission_time,
            "delivered_bits": list(self.delivered_bits),
            "violations": [str(v) for v in self.violations],
        }


@dataclass(frozen=True)
class FeasibilityViolation:
    kind: str
    index: int
    magnitude: float

    def __str__(self):
        return f"{self.kind} at {self.index}: {self.magnitude:.3e}"


def segment_propulsion_energy(rotor: RotorParams, delta, T):
    """Propulsion energy of straight segments of length delta flown in time T."""
    delta = np.asarray(delta, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ValueError("segment durations must be positive")
    a = delta**2 / (2 * rotor.v0**2)
    # sqrt(T^4 + delta^4/(4 v0^4)) - delta^2/(2 v0^2), rationalized
    induced_sq = T**4 / (np.sqrt(T**4 + a * a) + a)
    return (
        rotor.P0 * (T + 3 * delta**2 / (rotor.U_tip**2 * T))
        + rotor.Pi * np.sqrt(induced_sq)
        + 0.5 * rotor.d0 * rotor.rho * rotor.s * rotor.A * delta**3 / T**2
    )


def exact_energy(traj: DiscretizedTrajectory, rotor: RotorParams, P_c: float):
    """(propulsion J, communication J, total J)."""
    prop = float(np.sum(segment_propulsion_energy(rotor, traj.deltas, traj.T)))
    comm = float(P_c * np.sum(traj.tau))
    return prop, comm, prop + comm


def per_gn_throughput(traj: DiscretizedTrajectory, chan, gns) -> list[float]:
    wp = traj.waypoints[:-1]
    return [throughput(chan, wp, traj.tau, k, gns) for k in range(len(gns))]


def check_feasibility(traj: DiscretizedTrajectory, scenario, settings=None) -> list:
    out = []
    d = traj.deltas
    T = traj.T
    for m in np.flatnonzero(T <= 0):
        out.append(FeasibilityViolation("nonpositive duration", int(m), float(-T[m])))
    if traj.K != scenario.K:
        out.append(FeasibilityViolation("allocation columns", traj.K, float(scenario.K)))
        return out
    if not np.allclose(traj.waypoints[0], scenario.q_I, rtol=0, atol=1e-6):
        out.append(FeasibilityViolation("initial position", 0,
                                        float(np.linalg.norm(traj.waypoints[0] - scenario.q_I))))
    if scenario.endpoints_enabled and not np.allclose(traj.waypoints[-1], scenario.q_F, rtol=0, atol=1e-6):
        out.append(FeasibilityViolation("final position", traj.n_segments,
                                        float(np.linalg.norm(traj.waypoints[-1] - scenario.q_F))))
    cap = T * scenario.V_max
    for m in np.flatnonzero(d > cap * (1 + GEOM_RTOL) + 1e-9):
        out.append(FeasibilityViolation("speed cap", int(m), float(d[m] / T[m] - scenario.V_max)))
    if settings is not None:
        dm = settings.delta_max
        for m in np.flatnonzero(d > dm * (1 + GEOM_RTOL) + 1e-9):
            out.append(FeasibilityViolation("segment length cap", int(m), float(d[m] - dm)))
    for m, k in zip(*np.nonzero(traj.tau < 0)):
        out.append(FeasibilityViolation(f"negative allocation (node {k + 1})", int(m), float(-traj.tau[m, k])))
    excess = traj.tau.sum(axis=1) - T
    for m in np.flatnonzero(excess > GEOM_RTOL * np.maximum(T, 1.0)):
        out.append(FeasibilityViolation("allocation exceeds duration", int(m), float(excess[m])))
    if np.all(traj.tau >= 0):
        bits = per_gn_throughput(traj, scenario.chan, scenario.gns)
        for k, (b, g) in enumerate(zip(bits, scenario.gns)):
            if b < g.Q_bits * (1 - THROUGHPUT_RTOL):
                out.append(FeasibilityViolation("throughput shortfall (bits)", k, float(g.Q_bits - b)))
    return out


def evaluate(traj: DiscretizedTrajectory, scenario, settings=None) -> EvaluationReport:
    prop, comm, total = exact_energy(traj, scenario.rotor, scenario.P_c)
    bits = per_gn_throughput(traj, scenario.chan, scenario.gns) if np.all(traj.tau >= 0) else []
    return EvaluationReport(
        prop, comm, total, traj.mission_time, bits, check_feasibility(traj, scenario, settings)
    )
