import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavplan import rotor_power as rp

import oracles

# Frozen from tests/oracles.py (40-digit mpmath evaluation of the defining formulas).
P0_REF = 576.24
PI_REF = 792.984506920622
PH_REF = 1369.22450692062
P10_REF = 1105.09796224723
V_ME_REF = 21.5532264869
V_MR_REF = 38.2824574232
E0_STAR_REF = 31.1972581748


@pytest.fixture(scope="module")
def params():
    return rp.derive_params(rp.PAPER_TABLE_1)


def test_table_values_listed_in_the_table(params):
    assert params.A == pytest.approx(0.785, abs=5e-4)
    assert params.U_tip == 200.0
    assert params.s == pytest.approx(0.05, abs=1e-3)
    assert params.d0 == pytest.approx(0.3, abs=5e-3)
    assert params.v0 == pytest.approx(7.2, abs=0.05)


def test_derived_constants_match_high_precision_oracle(params):
    ref = oracles.rotor_constants()
    for name in rp.DERIVED_FIELDS:
        assert getattr(params, name) == pytest.approx(float(ref[name]), rel=1e-12), name
    assert params.P0 == pytest.approx(P0_REF, rel=1e-12)
    assert params.Pi == pytest.approx(PI_REF, rel=1e-12)
    assert params.P_h == pytest.approx(PH_REF, rel=1e-12)


def test_hand_rounded_constants_agree_to_one_percent(params):
    # hand figures use A=0.79 and s=0.05; the exact inputs differ by under 1%
    assert params.P0 == pytest.approx(580.7, rel=0.01)
    assert params.Pi == pytest.approx(790.7, rel=0.01)
    assert params.P_h == pytest.approx(1371, rel=0.01)
    assert float(rp.power(params, 10.0)) == pytest.approx(1108, rel=0.01)


def test_doubling_density_scales_v0(params):
    raw = rp.PAPER_TABLE_1
    dense = rp.derive_params(rp.RotorRawParams(**{**raw.__dict__, "rho": 2 * raw.rho}))
    assert dense.v0 == pytest.approx(params.v0 / math.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("field", rp.RAW_FIELDS)
def test_nonpositive_raw_field_is_rejected_by_name(field):
    raw = dict(rp.PAPER_TABLE_1.__dict__)
    raw[field] = 0
    with pytest.raises(ValueError, match=field):
        rp.RotorRawParams(**raw)


def test_given_derived_values_are_checked(params):
    rp.derive_params(rp.PAPER_TABLE_1, A=params.A * (1 + 1e-8))
    with pytest.raises(ValueError, match="A"):
        rp.derive_params(rp.PAPER_TABLE_1, A=0.79)


def test_check_derived_names_tampered_field(params):
    import dataclasses

    assert rp.check_derived(params) == []
    bad = dataclasses.replace(params, d0=params.d0 * 1.01)
    assert rp.check_derived(bad) == ["d0"]


def test_power_at_rest_is_hover_power(params):
    assert float(rp.power(params, 0.0)) == params.P0 + params.Pi == params.P_h


def test_power_at_ten_mps(params):
    assert float(rp.power(params, 10.0)) == pytest.approx(P10_REF, rel=1e-12)


@given(st.floats(0.0, 80.0))
def test_power_matches_mpmath(V):
    p = rp.derive_params(rp.PAPER_TABLE_1)
    assert float(rp.power(p, V)) == pytest.approx(float(oracles.power(V)), rel=1e-12)


def test_power_single_sign_change(params):
    V = np.arange(0, 60.0001, 0.01)
    d = np.sign(np.diff(rp.power(params, V)))
    assert d[0] < 0 and d[-1] > 0
    assert np.count_nonzero(np.diff(d)) == 1


def test_energy_per_meter_quasiconvex(params):
    V = np.arange(0.01, 60.0001, 0.01)
    d = np.sign(np.diff(rp.energy_per_meter(params, V)))
    assert np.count_nonzero(np.diff(d)) == 1


def test_negative_speed_rejected(params):
    with pytest.raises(ValueError):
        rp.power(params, -1.0)
    with pytest.raises(ValueError):
        rp.energy_per_meter(params, 0.0)
    with pytest.raises(ValueError):
        rp.power_approx(params, 0.0)


def test_power_approx_limits(params):
    v0 = params.v0
    assert rp.power_approx(params, 60.0) / rp.power(params, 60.0) == pytest.approx(1.0, abs=0.01)
    assert abs(rp.power_approx(params, 3 * v0) / rp.power(params, 3 * v0) - 1) <= 0.05
    assert rp.power_approx(params, v0 / 10) > rp.power(params, v0 / 10)


@given(st.floats(0.01, 80.0))
def test_energy_per_meter_times_speed_is_power(V):
    p = rp.derive_params(rp.PAPER_TABLE_1)
    assert float(rp.energy_per_meter(p, V)) * V == pytest.approx(float(rp.power(p, V)), rel=1e-14)


def test_energy_per_meter_blows_up_near_rest(params):
    _, V_mr = rp.characteristic_speeds(params, 60.0)
    e_star = float(rp.energy_per_meter(params, V_mr))
    assert e_star == pytest.approx(E0_STAR_REF, rel=1e-9)
    assert e_star == pytest.approx(31, rel=0.10)
    for V in (0.5, 0.1, 1e-3):
        assert rp.energy_per_meter(params, V) > 10 * e_star


def test_characteristic_speeds_match_oracles(params):
    V_me, V_mr = rp.characteristic_speeds(params, 60.0)
    assert V_me == pytest.approx(V_ME_REF, abs=1e-3)
    assert V_mr == pytest.approx(V_MR_REF, abs=1e-3)
    g_me, _ = oracles.grid_argmin(oracles.power_np, 0.0, 60.0, 0.01)
    g_mr, _ = oracles.grid_argmin(lambda v: oracles.power_np(v) / v, 0.01, 60.0, 0.01)
    assert abs(V_me - g_me) <= 0.01 and abs(V_mr - g_mr) <= 0.01
    assert 19 <= V_me <= 23 and 36 <= V_mr <= 42
    assert V_me <= V_mr <= 60.0


def test_characteristic_speeds_are_argmins(params):
    V_me, V_mr = rp.characteristic_speeds(params, 60.0)
    V = np.random.default_rng(1).uniform(1e-6, 60.0, 1000)
    assert np.all(rp.power(params, V_me) <= rp.power(params, V))
    assert np.all(rp.energy_per_meter(params, V_mr) <= rp.energy_per_meter(params, V))


def test_characteristic_speeds_clipped_by_low_cap(params):
    V_me, V_mr = rp.characteristic_speeds(params, 15.0)
    assert V_me == pytest.approx(15.0, abs=1e-3)
    assert V_mr == pytest.approx(15.0, abs=1e-3)
    with pytest.raises(ValueError):
        rp.characteristic_speeds(params, 0.0)


def test_induced_velocity_examples(params):
    v0 = params.v0
    assert float(rp.induced_velocity(params, 0.0, 1.0)) == v0
    assert float(rp.induced_velocity(params, v0, 1.0)) == pytest.approx(0.786151377757 * v0, rel=1e-11)
    V = np.sort(np.random.default_rng(2).uniform(0, 80, 500))
    assert np.all(np.diff(rp.induced_velocity(params, V)) < 0)
    with pytest.raises(ValueError):
        rp.induced_velocity(params, 1.0, 0.0)


@given(st.floats(0.0, 100.0))
def test_power_full_at_unit_thrust_ratio_is_power(V):
    p = rp.derive_params(rp.PAPER_TABLE_1)
    assert float(rp.power_full(p, V, 1.0)) == pytest.approx(float(rp.power(p, V)), rel=1e-15)


def test_power_full_hover_with_extra_thrust(params):
    assert float(rp.power_full(params, 0.0, 1.0)) == params.P_h
    assert float(rp.power_full(params, 0.0, 1.2)) == pytest.approx(
        params.P0 + params.Pi * 1.2**1.5, rel=1e-14
    )
    with pytest.raises(ValueError):
        rp.power_full(params, 0.0, -1.0)


def test_components_sum_to_power(params):
    V = np.linspace(0, 60, 121)
    b, i, p = rp.power_components(params, V)
    np.testing.assert_allclose(b + i + p, rp.power(params, V), rtol=1e-15)
    assert np.all(np.diff(b) > 0) and np.all(np.diff(i) < 0) and np.all(np.diff(p) > 0)
