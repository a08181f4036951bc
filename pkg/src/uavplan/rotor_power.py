"""Rotary-wing propulsion power model and its characteristic speeds."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import minimize_scalar

RAW_FIELDS = ("W", "rho", "R", "Omega", "b", "c", "S_FP", "k", "delta")
DERIVED_FIELDS = ("A", "U_tip", "s", "d0", "v0", "P0", "Pi", "P_h")

# consistency tolerance for user-supplied derived values
DERIVED_RTOL = 1e-6


@dataclass(frozen=True)
class RotorRawParams:
    W: float  # weight, N
    rho: float  # air density, kg/m^3
    R: float  # rotor radius, m
    Omega: float  # blade angular velocity, rad/s
    b: int  # number of blades
    c: float  # blade chord, m
    S_FP: float  # fuselage equivalent flat plate area, m^2
    k: float  # induced power correction
    delta: float  # profile drag coefficient

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"rotor.{f.name} must be positive, got {v!r}")
        if self.b < 2 or int(self.b) != self.b:
            raise ValueError(f"rotor.b must be an integer >= 2, got {self.b!r}")


@dataclass(frozen=True)
class RotorParams(RotorRawParams):
    A: float = 0.0
    U_tip: float = 0.0
    s: float = 0.0
    d0: float = 0.0
    v0: float = 0.0
    P0: float = 0.0
    Pi: float = 0.0
    P_h: float = 0.0

    @property
    def raw(self) -> RotorRawParams:
        return RotorRawParams(**{f: getattr(self, f) for f in RAW_FIELDS})

    @property
    def parasite_coef(self) -> float:
        """Coefficient of V^3 in the parasite term, 0.5*d0*rho*s*A."""
        return 0.5 * self.d0 * self.rho * self.s * self.A


PAPER_TABLE_1 = RotorRawParams(
    W=100.0, rho=1.225, R=0.5, Omega=400.0, b=4, c=0.0196, S_FP=0.0118, k=0.1, delta=0.012
)

PROFILES = {"paper-table-1": PAPER_TABLE_1}


def _derived_values(raw: RotorRawParams) -> dict:
    A = math.pi * raw.R**2
    s = raw.b * raw.c / (math.pi * raw.R)
    return {
        "A": A,
        "U_tip": raw.Omega * raw.R,
        "s": s,
        "d0": raw.S_FP / (s * A),
        "v0": math.sqrt(raw.W / (2 * raw.rho * A)),
        "P0": raw.delta / 8 * raw.rho * s * A * raw.Omega**3 * raw.R**3,
        "Pi": (1 + raw.k) * raw.W**1.5 / math.sqrt(2 * raw.rho * A),
    }


def derive_params(raw: RotorRawParams, **given) -> RotorParams:
    """Compute the derived power constants from the physical rotor constants.

    Derived values may also be passed in (``given``); each must agree with its
    defining formula to ``DERIVED_RTOL`` or a ``ValueError`` naming it is raised.
    """
    vals = _derived_values(raw)
    vals["P_h"] = vals["P0"] + vals["Pi"]
    for name, v in given.items():
        if name not in vals:
            raise ValueError(f"unknown derived rotor field {name!r}")
        if not math.isclose(v, vals[name], rel_tol=DERIVED_RTOL):
            raise ValueError(
                f"rotor.{name}={v!r} inconsistent with raw parameters (expected {vals[name]!r})"
            )
    raw_vals = {f: getattr(raw, f) for f in RAW_FIELDS}
    return RotorParams(**raw_vals, **vals)


def check_derived(params: RotorParams, rtol: float = 1e-12) -> list[str]:
    """Names of derived fields that do not match their formulas."""
    vals = _derived_values(params.raw)
    vals["P_h"] = vals["P0"] + vals["Pi"]
    return [n for n, v in vals.items() if not math.isclose(getattr(params, n), v, rel_tol=rtol)]


def _induced_factor(x, kappa=1.0):
    # sqrt(sqrt(kappa^2 + x^2) - x) without cancellation at large x
    return np.sqrt(kappa**2 / (np.sqrt(kappa**2 + x * x) + x))


def _check_speed(V, strict: bool):
    V = np.asarray(V, dtype=float)
    bad = V <= 0 if strict else V < 0
    if np.any(bad) or np.any(~np.isfinite(V)):
        op = ">" if strict else ">="
        raise ValueError(f"speed must be {op} 0, got {V}")
    return V


def power_components(params: RotorParams, V):
    """(blade profile, induced, parasite) power in W at level-flight speed V."""
    V = _check_speed(V, strict=False)
    blade = params.P0 * (1 + 3 * V**2 / params.U_tip**2)
    induced = params.Pi * _induced_factor(V**2 / (2 * params.v0**2))
    parasite = params.parasite_coef * V**3
    return blade, induced, parasite


def power(params: RotorParams, V):
    """Propulsion power (W) at forward speed V (m/s), thrust equal to weight."""
    blade, induced, parasite = power_components(params, V)
    return blade + induced + parasite


def power_approx(params: RotorParams, V):
    """High-speed convex approximation; the induced term becomes Pi*v0/V."""
    V = _check_speed(V, strict=True)
    return (
        params.P0 * (1 + 3 * V**2 / params.U_tip**2)
        + params.Pi * params.v0 / V
        + params.parasite_coef * V**3
    )


def energy_per_meter(params: RotorParams, V):
    """Propulsion energy per unit distance, J/m."""
    V = _check_speed(V, strict=True)
    return power(params, V) / V


def induced_velocity(params: RotorParams, V, kappa=1.0):
    V = _check_speed(V, strict=False)
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    return params.v0 * _induced_factor(V**2 / (2 * params.v0**2), kappa)


def power_full(params: RotorParams, V, kappa=1.0):
    """Forward-flight power for an arbitrary thrust-to-weight ratio kappa."""
    V = _check_speed(V, strict=False)
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    return (
        params.P0 * (1 + 3 * V**2 / params.U_tip**2)
        + params.Pi * kappa * _induced_factor(V**2 / (2 * params.v0**2), kappa)
        + params.parasite_coef * V**3
    )


def _scan_minimize(f, lo, hi, step=0.5, xatol=1e-5):
    grid = np.arange(lo, hi + step, step)
    grid = np.clip(grid, lo, hi)
    i = int(np.argmin(f(grid)))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if b - a <= xatol:
        return float(grid[i])
    res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": xatol})
    x = float(res.x)
    # the bounded search never probes the bracket ends exactly
    for cand in (a, b):
        if f(cand) < f(x):
            x = float(cand)
    return x


def characteristic_speeds(params: RotorParams, V_max: float) -> tuple[float, float]:
    """Maximum-endurance and maximum-range speeds on [0, V_max]."""
    if not V_max > 0:
        raise ValueError(f"V_max must be positive, got {V_max!r}")
    V_me = _scan_minimize(lambda v: power(params, v), 0.0, V_max)
    V_mr = _scan_minimize(lambda v: energy_per_meter(params, v), 1e-3, V_max)
    return V_me, V_mr
