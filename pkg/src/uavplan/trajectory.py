"""Path-discretized trajectory: waypoints, per-segment durations and TDMA allocations."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FMT = "%.12g"


@dataclass
class DiscretizedTrajectory:
    waypoints: np.ndarray  # (M+2, 2) m
    T: np.ndarray  # (M+1,) s, time spent on segment m
    tau: np.ndarray  # (M+1, K) s, time segment m gives to node k

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        self.T = np.asarray(self.T, dtype=float).ravel()
        self.tau = np.asarray(self.tau, dtype=float)
        if self.tau.ndim == 1:
            self.tau = self.tau[:, None]
        n = len(self.T)
        if len(self.waypoints) != n + 1 or self.tau.shape[0] != n:
            raise ValueError(
                f"inconsistent trajectory: {len(self.waypoints)} waypoints, {n} durations, "
                f"allocation shape {self.tau.shape}"
            )

    @property
    def n_segments(self) -> int:
        return len(self.T)

    @property
    def K(self) -> int:
        return self.tau.shape[1]

    @property
    def deltas(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)

    @property
    def speeds(self) -> np.ndarray:
        return self.deltas / self.T

    @property
    def mission_time(self) -> float:
        return float(np.sum(self.T))

    @property
    def path_length(self) -> float:
        return float(np.sum(self.deltas))

    @property
    def t_start(self) -> np.ndarray:
        """Arrival time at each waypoint."""
        return np.concatenate([[0.0], np.cumsum(self.T)])

    def write_csv(self, path) -> None:
        K = self.K
        header = ["t_start_s", "x_m", "y_m", "T_m_s"] + [f"tau_{k + 1}_s" for k in range(K)]
        t0 = self.t_start
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for m, q in enumerate(self.waypoints):
                if m < self.n_segments:
                    T, tau = self.T[m], self.tau[m]
                else:
                    T, tau = 0.0, np.zeros(K)
                w.writerow([FMT % v for v in (t0[m], q[0], q[1], T, *tau)])

    @classmethod
    def read_csv(cls, path) -> "DiscretizedTrajectory":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if header[:4] != ["t_start_s", "x_m", "y_m", "T_m_s"]:
            raise ValueError(f"{path}: unexpected trajectory header {header[:4]}")
        return cls(body[:, 1:3], body[:-1, 3], body[:-1, 4:])
