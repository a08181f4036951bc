import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavplan.rotor_power import PAPER_TABLE_1, derive_params
from uavplan.scenario import (
    DEFAULT_GN_POSITIONS,
    Scenario,
    ScenarioError,
    SolverSettings,
    apply_overrides,
    default_scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    validate,
)


def write(tmp_path, text, name="sc.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_file_gets_defaults(tmp_path):
    sc, st_ = load_scenario(write(tmp_path, "gns:\n  - w: [100, 200]\n  - w: [300, 400]\n"))
    assert sc.chan.gamma0 == pytest.approx(1e6, rel=1e-15)
    assert (sc.chan.H, sc.chan.B, sc.P_c, sc.V_max) == (100.0, 1e6, 50.0, 60.0)
    assert sc.q_I == (0.0, 0.0) and sc.q_F == (800.0, 800.0)
    assert sc.rotor == derive_params(PAPER_TABLE_1)
    assert st_.delta_max == 10.0 and st_.epsilon_sca == 1e-4 and st_.max_sca_iters == 50
    assert sc.K == 2


def test_empty_file_gives_default_layout(tmp_path):
    sc, _ = load_scenario(write(tmp_path, ""))
    np.testing.assert_array_equal(sc.gn_positions, np.array(DEFAULT_GN_POSITIONS))


def test_negative_speed_cap_message(tmp_path):
    with pytest.raises(ScenarioError, match="V_max must be positive"):
        load_scenario(write(tmp_path, "V_max: -1\ngns:\n  - w: [0, 0]\n"))


def test_parse_error_has_line_info(tmp_path):
    with pytest.raises(ScenarioError, match=r"sc.yaml:\d+:\d+: parse error"):
        load_scenario(write(tmp_path, "gns:\n  - w: [0, 0\n"))


def test_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/scenario.yaml")


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("gns: []\n", "gns"),
        ("gns:\n  - {x: 1}\n", r"gns\[0\]"),
        ("gns:\n  - w: [0, 0]\n    Q_bits: -5\n", "Q_bits"),
        ("chan: {H: 0}\n", "H"),
        ("chan: {gamma0: 1e6, gamma0_db: 60}\n", "gamma0"),
        ("rotor: {R: -1}\n", "R"),
        ("rotor: {A: 0.79}\n", "A"),
        ("rotor: {profile: nope}\n", "profile"),
        ("solver: {delta_max: 0}\n", "delta_max"),
        ("solver: {bogus: 1}\n", "bogus"),
        ("P_c: -3\n", "P_c"),
        ("q_I: [1]\n", "q_I"),
    ],
)
def test_validation_errors_name_the_field(tmp_path, text, pattern):
    with pytest.raises(ScenarioError, match=pattern):
        load_scenario(write(tmp_path, text))


def test_db_suffix_and_linear_key(tmp_path):
    a, _ = load_scenario(write(tmp_path, "chan: {gamma0_db: 50}\n"))
    b, _ = load_scenario(write(tmp_path, "chan: {gamma0: 1.0e5}\n"))
    assert a.chan.gamma0 == pytest.approx(b.chan.gamma0, rel=1e-15)


def test_round_trip_default(tmp_path):
    sc = default_scenario()
    settings = SolverSettings(epsilon_sca=3e-5, delta_max=7.5, rng_seed=4)
    save_scenario(tmp_path / "x.yaml", sc, settings)
    sc2, st2 = load_scenario(tmp_path / "x.yaml")
    assert sc2 == sc and st2 == settings


finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


@given(
    st.lists(st.tuples(finite, finite, st.floats(1.0, 1e10)), min_size=1, max_size=6),
    st.tuples(finite, finite),
    st.floats(1.0, 200.0),
    st.floats(0.0, 500.0),
    st.floats(20.0, 120.0),
    st.booleans(),
)
def test_round_trip_is_bit_exact(gns, q_F, V_max, P_c, gamma_db, ends):
    import tempfile
    from pathlib import Path

    from uavplan.comms import ChannelParams, GroundNode, db_to_linear

    chan = ChannelParams(db_to_linear(gamma_db), 1e6, 100.0)
    sc = Scenario(
        rotor=derive_params(PAPER_TABLE_1), chan=chan,
        gns=tuple(GroundNode.make((x, y), q, chan.B) for x, y, q in gns),
        q_F=q_F, V_max=V_max, P_c=P_c, endpoints_enabled=ends,
    )
    with tempfile.TemporaryDirectory() as d:
        save_scenario(Path(d) / "s.yaml", sc)
        back, _ = load_scenario(Path(d) / "s.yaml")
    assert back == sc


def test_default_scenario_is_clean():
    assert validate(default_scenario()) == []


def test_validate_flags_inconsistent_area():
    sc = default_scenario()
    bad = dataclasses.replace(sc, rotor=dataclasses.replace(sc.rotor, A=0.79))
    v = validate(bad)
    assert [x.field for x in v] == ["rotor.A"] and v[0].level == "error"


def test_duplicate_positions_only_warn():
    data = {"gns": [{"w": [5, 5]}, {"w": [5, 5]}]}
    sc, _ = scenario_from_dict(data)
    v = validate(sc)
    assert len(v) == 1 and v[0].level == "warning" and "gns[1]" in v[0].field


def test_overrides():
    data = apply_overrides({}, ["chan.gamma0_db=50", "V_max=30", "solver.delta_max=5", "Q_bits=2e6"])
    sc, st_ = scenario_from_dict(data)
    assert sc.chan.gamma0 == pytest.approx(1e5)
    assert sc.V_max == 30 and st_.delta_max == 5
    assert all(g.Q_bits == 2e6 for g in sc.gns)
    data = apply_overrides({"gns": [{"w": [1, 2], "Q_bits": 5}]}, ["gns.0.w=[3, 4]"])
    assert data["gns"][0]["w"] == [3, 4]
    with pytest.raises(ScenarioError):
        apply_overrides({}, ["novalue"])


def test_with_targets_keeps_normalization():
    sc = default_scenario().with_targets([1e6, 2e6, 3e6])
    assert [g.Q_norm for g in sc.gns] == [1.0, 2.0, 3.0]


def test_free_final_position():
    sc, _ = scenario_from_dict({"endpoints_enabled": False})
    assert sc.q_final is None


def test_settings_validation():
    with pytest.raises(ScenarioError):
        SolverSettings(epsilon_sca=0)
    with pytest.raises(ScenarioError):
        SolverSettings(max_sca_iters=0)
    with pytest.raises(ScenarioError):
        SolverSettings(path_margin=0.5)
