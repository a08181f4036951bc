"""Scenario and solver configuration: data model, YAML I/O, validation."""
from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .comms import ChannelParams, GroundNode, db_to_linear
from .rotor_power import (
    DERIVED_FIELDS,
    PROFILES,
    RAW_FIELDS,
    RotorParams,
    RotorRawParams,
    check_derived,
    derive_params,
)

DEFAULT_PROFILE = "paper-table-1"
DEFAULT_GN_POSITIONS = ((200.0, 700.0), (600.0, 250.0), (750.0, 650.0))
DEFAULT_Q_BITS = 100e6


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    rotor: RotorParams
    chan: ChannelParams
    gns: tuple[GroundNode, ...]
    q_I: tuple[float, float] = (0.0, 0.0)
    q_F: tuple[float, float] = (800.0, 800.0)
    V_max: float = 60.0
    P_c: float = 50.0
    endpoints_enabled: bool = True

    @property
    def K(self) -> int:
        return len(self.gns)

    @property
    def gn_positions(self) -> np.ndarray:
        return np.array([g.w for g in self.gns], dtype=float).reshape(-1, 2)

    @property
    def q_final(self):
        """Pinned final position, or None when the final location is free."""
        return np.asarray(self.q_F, dtype=float) if self.endpoints_enabled else None

    def with_targets(self, Q_bits) -> "Scenario":
        Q = np.broadcast_to(np.asarray(Q_bits, dtype=float), (self.K,))
        gns = tuple(GroundNode.make(g.w, q, self.chan.B) for g, q in zip(self.gns, Q))
        return dataclasses.replace(self, gns=gns)


@dataclass(frozen=True)
class SolverSettings:
    epsilon_sca: float = 1e-4
    max_sca_iters: int = 50
    delta_max: float = 10.0
    kernel_feas_tol: float = 1e-6
    kernel_opt_tol: float = 1e-6
    kernel_max_newton: int = 400
    rng_seed: int = 0
    tsp_restarts: int = 8
    # waypoint budget: (M+1) * delta_max >= path_margin * hover-plan path length
    path_margin: float = 2.0

    def __post_init__(self):
        if not self.path_margin >= 1.0:
            raise ScenarioError(f"solver.path_margin must be at least 1, got {self.path_margin!r}")
        for name in ("epsilon_sca", "delta_max", "kernel_feas_tol", "kernel_opt_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ScenarioError(f"solver.{name} must be positive, got {v!r}")
        if self.max_sca_iters < 1:
            raise ScenarioError("solver.max_sca_iters must be at least 1")


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    level: str = "error"  # or "warning"

    def __str__(self):
        return f"[{self.level}] {self.field}: {self.message}"


def default_scenario(Q_bits: float = DEFAULT_Q_BITS) -> Scenario:
    chan = ChannelParams(gamma0=db_to_linear(60.0), B=1e6, H=100.0)
    gns = tuple(GroundNode.make(w, Q_bits, chan.B) for w in DEFAULT_GN_POSITIONS)
    return Scenario(rotor=derive_params(PROFILES[DEFAULT_PROFILE]), chan=chan, gns=gns)


def validate(sc: Scenario) -> list[Violation]:
    """All invariant violations of a scenario; an empty list means it is usable."""
    out: list[Violation] = []
    r = sc.rotor
    for name in RAW_FIELDS:
        v = getattr(r, name)
        if not (np.isfinite(v) and v > 0):
            out.append(Violation(f"rotor.{name}", "must be positive"))
    if r.b < 2:
        out.append(Violation("rotor.b", "must be at least 2"))
    if not out:
        for name in check_derived(r, rtol=1e-9):
            out.append(Violation(f"rotor.{name}", "inconsistent with its defining formula"))
    for name in ("gamma0", "B", "H"):
        v = getattr(sc.chan, name)
        if not (np.isfinite(v) and v > 0):
            out.append(Violation(f"chan.{name}", "must be positive"))
    if not (np.isfinite(sc.V_max) and sc.V_max > 0):
        out.append(Violation("V_max", "must be positive"))
    if not (np.isfinite(sc.P_c) and sc.P_c >= 0):
        out.append(Violation("P_c", "must be nonnegative"))
    for name in ("q_I", "q_F"):
        if not np.all(np.isfinite(getattr(sc, name))):
            out.append(Violation(name, "must be finite"))
    if sc.K == 0:
        out.append(Violation("gns", "at least one ground node is required"))
    seen = {}
    for i, g in enumerate(sc.gns):
        if not np.all(np.isfinite(g.w)):
            out.append(Violation(f"gns[{i}].w", "must be finite"))
        if not g.Q_bits > 0:
            out.append(Violation(f"gns[{i}].Q_bits", "must be positive"))
        elif not math.isclose(g.Q_norm, g.Q_bits / sc.chan.B, rel_tol=1e-12):
            out.append(Violation(f"gns[{i}].Q_norm", "must equal Q_bits / B"))
        key = tuple(g.w)
        if key in seen:
            out.append(
                Violation(f"gns[{i}].w", f"duplicates position of gns[{seen[key]}]", "warning")
            )
        seen.setdefault(key, i)
    return out


# ---------------------------------------------------------------- file format


def _num(d: dict, key: str, where: str, default=None):
    if key not in d:
        if default is None:
            raise ScenarioError(f"{where}{key}: missing")
        return default
    try:
        return float(d[key])
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}{key}: expected a number, got {d[key]!r}") from None


def _point(v, where):
    try:
        x, y = (float(c) for c in v)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected [x, y], got {v!r}") from None
    return (x, y)


def _rotor_from_dict(d: dict) -> RotorParams:
    d = dict(d or {})
    profile = d.pop("profile", DEFAULT_PROFILE)
    if profile not in PROFILES:
        raise ScenarioError(f"rotor.profile: unknown profile {profile!r}")
    base = dataclasses.asdict(PROFILES[profile])
    for name in RAW_FIELDS:
        if name in d:
            base[name] = _num(d, name, "rotor.")
    base["b"] = int(base["b"])
    given = {n: _num(d, n, "rotor.") for n in DERIVED_FIELDS if n in d}
    unknown = set(d) - set(RAW_FIELDS) - set(DERIVED_FIELDS)
    if unknown:
        raise ScenarioError(f"rotor: unknown keys {sorted(unknown)}")
    try:
        return derive_params(RotorRawParams(**base), **given)
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def scenario_from_dict(data: dict) -> tuple[Scenario, SolverSettings]:
    data = dict(data or {})
    rotor = _rotor_from_dict(data.get("rotor"))
    c = dict(data.get("chan") or {})
    if "gamma0" in c and "gamma0_db" in c:
        raise ScenarioError("chan: give either gamma0 or gamma0_db, not both")
    if "gamma0" in c:
        gamma0 = _num(c, "gamma0", "chan.")
    else:
        gamma0 = db_to_linear(_num(c, "gamma0_db", "chan.", 60.0))
    try:
        chan = ChannelParams(
            gamma0=gamma0, B=_num(c, "B", "chan.", 1e6), H=_num(c, "H", "chan.", 100.0)
        )
    except ValueError as e:
        raise ScenarioError(str(e)) from None

    q_default = _num(data, "Q_bits", "", DEFAULT_Q_BITS)
    raw_gns = data.get("gns")
    if raw_gns is None:
        raw_gns = [{"w": list(w)} for w in DEFAULT_GN_POSITIONS]
    if not isinstance(raw_gns, list) or not raw_gns:
        raise ScenarioError("gns: expected a nonempty list of ground nodes")
    gns = []
    for i, g in enumerate(raw_gns):
        if not isinstance(g, dict) or "w" not in g:
            raise ScenarioError(f"gns[{i}]: expected a mapping with key 'w'")
        w = _point(g["w"], f"gns[{i}].w")
        Q = _num(g, "Q_bits", f"gns[{i}].", q_default)
        try:
            gns.append(GroundNode.make(w, Q, chan.B))
        except ValueError as e:
            raise ScenarioError(f"gns[{i}]: {e}") from None

    V_max = _num(data, "V_max", "", 60.0)
    P_c = _num(data, "P_c", "", 50.0)
    if not V_max > 0:
        raise ScenarioError("V_max must be positive")
    if not P_c >= 0:
        raise ScenarioError("P_c must be nonnegative")
    sc = Scenario(
        rotor=rotor,
        chan=chan,
        gns=tuple(gns),
        q_I=_point(data.get("q_I", (0.0, 0.0)), "q_I"),
        q_F=_point(data.get("q_F", (800.0, 800.0)), "q_F"),
        V_max=V_max,
        P_c=P_c,
        endpoints_enabled=bool(data.get("endpoints_enabled", True)),
    )
    errors = [v for v in validate(sc) if v.level == "error"]
    if errors:
        raise ScenarioError("; ".join(str(v) for v in errors))

    s = dict(data.get("solver") or {})
    s.setdefault("delta_max", chan.H / 10)
    known = {f.name: f.type for f in dataclasses.fields(SolverSettings)}
    unknown = set(s) - set(known)
    if unknown:
        raise ScenarioError(f"solver: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in s.items():
        kw[k] = int(v) if known[k] == "int" else _num(s, k, "solver.")
    settings = SolverSettings(**kw)
    return sc, settings


def scenario_to_dict(sc: Scenario, settings: SolverSettings | None = None) -> dict:
    r = sc.rotor
    d = {
        "rotor": {n: (int(getattr(r, n)) if n == "b" else float(getattr(r, n))) for n in RAW_FIELDS},
        "chan": {"gamma0": float(sc.chan.gamma0), "B": float(sc.chan.B), "H": float(sc.chan.H)},
        "q_I": [float(c) for c in sc.q_I],
        "q_F": [float(c) for c in sc.q_F],
        "V_max": float(sc.V_max),
        "P_c": float(sc.P_c),
        "endpoints_enabled": bool(sc.endpoints_enabled),
        "gns": [{"w": [float(c) for c in g.w], "Q_bits": float(g.Q_bits)} for g in sc.gns],
    }
    if settings is not None:
        d["solver"] = dataclasses.asdict(settings)
    return d


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides to a raw scenario mapping."""
    data = copy.deepcopy(data or {})
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r}: expected KEY=VALUE")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.strip().split(".")
        if parts == ["Q_bits"]:
            for g in data.get("gns") or []:
                g.pop("Q_bits", None)
        node = data
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            else:
                node = node.setdefault(p, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
            continue
        twins = {"gamma0": "gamma0_db", "gamma0_db": "gamma0"}
        if parts[0] == "chan" and last in twins:
            node.pop(twins[last], None)
        node[last] = value
    return data


def read_raw(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ScenarioError(f"{where}: parse error: {getattr(e, 'problem', e)}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return data


def load_scenario(path, overrides: list[str] | None = None) -> tuple[Scenario, SolverSettings]:
    data = apply_overrides(read_raw(path), overrides or [])
    return scenario_from_dict(data)


def save_scenario(path, sc: Scenario, settings: SolverSettings | None = None) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(sc, settings), sort_keys=False))
