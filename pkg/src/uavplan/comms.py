"""Line-of-sight channel, spectral rate and throughput accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    gamma0: float  # reference SNR at 1 m, linear
    B: float  # bandwidth, Hz
    H: float  # altitude, m

    def __post_init__(self):
        for name in ("gamma0", "B", "H"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"chan.{name} must be positive, got {v!r}")

    @property
    def peak_snr(self) -> float:
        return self.gamma0 / self.H**2


@dataclass(frozen=True)
class GroundNode:
    w: tuple[float, float]
    Q_bits: float
    Q_norm: float  # bits/Hz

    def __post_init__(self):
        if not (math.isfinite(self.Q_bits) and self.Q_bits > 0):
            raise ValueError(f"Q_bits must be positive, got {self.Q_bits!r}")
        if not all(math.isfinite(c) for c in self.w):
            raise ValueError(f"ground node position must be finite, got {self.w!r}")

    @classmethod
    def make(cls, w, Q_bits: float, B: float) -> "GroundNode":
        return cls(w=(float(w[0]), float(w[1])), Q_bits=float(Q_bits), Q_norm=float(Q_bits) / B)

    @property
    def pos(self) -> np.ndarray:
        return np.asarray(self.w, dtype=float)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def spectral_rate(chan: ChannelParams, uav_xy, gn: GroundNode):
    """Achievable rate in bits/s/Hz with the UAV at horizontal position uav_xy."""
    d2 = np.sum((np.asarray(uav_xy, dtype=float) - gn.pos) ** 2, axis=-1)
    return np.log2(1.0 + chan.gamma0 / (chan.H**2 + d2))


def hover_time(chan: ChannelParams, hover_xy, gn: GroundNode):
    """Seconds of hovering at hover_xy needed to deliver the node's target."""
    return gn.Q_norm / spectral_rate(chan, hover_xy, gn)


def throughput(chan: ChannelParams, waypoints, alloc, gn_index: int, gns) -> float:
    """Bits delivered to node ``gn_index`` by per-waypoint allocations.

    ``alloc`` has shape (n_waypoints, K) in seconds; row m is spent at waypoint m.
    """
    waypoints = np.asarray(waypoints, dtype=float)
    alloc = np.asarray(alloc, dtype=float)
    if alloc.ndim != 2 or alloc.shape[0] != len(waypoints):
        raise ValueError(
            f"allocation shape {alloc.shape} does not match {len(waypoints)} waypoints"
        )
    if np.any(alloc < 0):
        raise ValueError("time allocations must be nonnegative")
    tau = alloc[:, gn_index]
    return float(chan.B * np.sum(tau * spectral_rate(chan, waypoints, gns[gn_index])))
