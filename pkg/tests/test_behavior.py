"""Lateral behavior rules, pinned to hand-computed values.

Every numeric expectation here was worked out on paper from the affine
curve-cutting rule, the linear traffic ramp, and the half-gradient rate
limit; the implementation must hit them to 1e-9.
"""
import math

import pytest
from hypothesis import given, strategies as st

from drivestyle.behavior import (
    CONTROLLER_TICK,
    NO_TRAFFIC,
    BehaviorState,
    TrafficObservation,
    curve_cut_offset,
    lateral_accel_preview,
    rate_limit_traffic_offset,
    target_offset,
    traffic_offset,
)
from drivestyle.errors import ValidationError
from drivestyle.styles import builtin_style

TOL = 1e-9

passive = builtin_style("passive")
rail = builtin_style("rail")
sportive = builtin_style("sportive")


# --- lateral acceleration preview ---


def test_preview_left_curve():
    assert lateral_accel_preview(0.01, 20.0) == pytest.approx(4.0, abs=TOL)


def test_preview_straight():
    assert lateral_accel_preview(0.0, 30.0) == 0.0


def test_preview_right_curve():
    assert lateral_accel_preview(-0.005, 10.0) == pytest.approx(-0.5, abs=TOL)


@given(st.floats(-0.02, 0.02), st.floats(0.0, 50.0))
def test_preview_sign_follows_curvature(k, v):
    a_y = lateral_accel_preview(k, v)
    if k == 0.0 or v == 0.0:
        assert a_y == 0.0
    else:
        assert math.copysign(1.0, a_y) == math.copysign(1.0, k)


# --- curve cutting ---


def test_cut_sportive_left():
    # 4 * 0.141 + 0.135, mirrored left
    assert curve_cut_offset(sportive, 4.0) == pytest.approx(0.699, abs=TOL)


def test_cut_rail_is_zero():
    assert curve_cut_offset(rail, 4.0) == 0.0


def test_cut_passive_left():
    # 3 * 0.042 - 0.09
    assert curve_cut_offset(passive, 3.0) == pytest.approx(0.036, abs=TOL)


def test_cut_zero_accel_exactly_zero():
    for style in (passive, rail, sportive):
        assert curve_cut_offset(style, 0.0) == 0.0


@given(st.floats(0.01, 8.0))
def test_cut_mirrors_to_curve_inside(a_y):
    left = curve_cut_offset(sportive, a_y)
    right = curve_cut_offset(sportive, -a_y)
    assert right == pytest.approx(-left, abs=TOL)


@given(st.floats(0.0, 8.0), st.floats(0.0, 8.0))
def test_cut_monotone_in_accel_magnitude(a, b):
    lo, hi = sorted((a, b))
    for style in (passive, sportive):
        if lo > 0.0:
            assert curve_cut_offset(style, lo) <= curve_cut_offset(style, hi) + TOL


# --- traffic ramp ---


def test_traffic_shift_at_preview_boundary():
    assert traffic_offset(passive, TrafficObservation(80.0)) == pytest.approx(0.0, abs=TOL)


def test_traffic_shift_halfway():
    assert traffic_offset(passive, TrafficObservation(40.0)) == pytest.approx(-0.109, abs=TOL)


def test_traffic_shift_abreast():
    assert traffic_offset(passive, TrafficObservation(0.0)) == pytest.approx(-0.218, abs=TOL)


def test_traffic_shift_rail_is_zero():
    assert traffic_offset(rail, TrafficObservation(10.0)) == 0.0


def test_traffic_shift_absent():
    assert traffic_offset(passive, NO_TRAFFIC) == 0.0


def test_traffic_shift_beyond_preview_clamped():
    assert traffic_offset(passive, TrafficObservation(200.0)) == 0.0


def test_traffic_inverted_ramp_clamped_to_full_shift():
    # the comparison variant grows with distance and saturates at d_t0
    obs = TrafficObservation(40.0)
    assert traffic_offset(passive, obs, inverted_ramp=True) == passive.d_t0
    near = traffic_offset(passive, TrafficObservation(0.0), inverted_ramp=True)
    assert near == pytest.approx(passive.d_t0, abs=TOL)


def test_observation_rejects_negative_gap():
    with pytest.raises(ValidationError):
        TrafficObservation(-1.0)


@given(st.floats(0.0, 200.0))
def test_traffic_shift_bounded(d):
    for style in (passive, sportive):
        val = traffic_offset(style, TrafficObservation(d))
        assert style.d_t0 - TOL <= val <= 0.0


@given(st.floats(0.0, 80.0), st.floats(0.0, 80.0))
def test_traffic_shift_monotone_in_gap(d1, d2):
    lo, hi = sorted((d1, d2))
    # closer vehicle, larger rightward shift
    assert traffic_offset(passive, TrafficObservation(lo)) <= traffic_offset(
        passive, TrafficObservation(hi)
    ) + TOL


# --- rate limit ---


def test_rate_limit_first_step_toward_shift():
    # passive ramp slope 0.218/80; one step moves half of that
    state = BehaviorState()
    got = rate_limit_traffic_offset(passive, state, -0.218, steps=1.0)
    assert got == pytest.approx(-0.0013625, abs=TOL)
    assert state.d_cl_t_prev == got


def test_rate_limit_release_two_steps():
    state = BehaviorState(d_cl_t_prev=-0.218)
    got = rate_limit_traffic_offset(passive, state, 0.0, steps=2.0)
    assert got == pytest.approx(-0.215275, abs=TOL)


def test_rate_limit_reaches_raw_when_close():
    state = BehaviorState(d_cl_t_prev=-0.001)
    got = rate_limit_traffic_offset(passive, state, 0.0, steps=1.0)
    assert got == 0.0


@given(
    st.floats(-0.218, 0.0),
    st.floats(-0.218, 0.0),
    st.floats(0.0, 10.0),
)
def test_rate_limit_bound_invariant(prev, raw, steps):
    state = BehaviorState(d_cl_t_prev=prev)
    got = rate_limit_traffic_offset(passive, state, raw, steps)
    allow = 0.5 * abs(passive.d_t0 / passive.rho_t) * steps
    assert abs(got - prev) <= allow + TOL
    # never overshoots past the raw target
    assert min(prev, raw) - TOL <= got <= max(prev, raw) + TOL


def test_rate_limit_converges_to_raw():
    state = BehaviorState()
    for _ in range(200):
        rate_limit_traffic_offset(passive, state, -0.218, steps=1.0)
    assert state.d_cl_t_prev == pytest.approx(-0.218, abs=TOL)


# --- combined target ---


def test_target_straight_no_traffic_is_zero():
    state = BehaviorState()
    assert target_offset(passive, 0.0, 25.0, NO_TRAFFIC, state) == 0.0


def test_target_left_cut_untouched_without_traffic():
    # a plain min against an idle traffic branch would clip this to zero
    state = BehaviorState()
    got = target_offset(sportive, 0.01, 20.0, NO_TRAFFIC, state)
    assert got == pytest.approx(0.699, abs=TOL)


def test_target_traffic_overrides_left_cut():
    # sportive in a left curve with an oncoming vehicle at 40 m after
    # plenty of settle time: min(+0.699, -0.005) = -0.005
    state = BehaviorState()
    got = target_offset(
        sportive, 0.01, 20.0, TrafficObservation(40.0), state, steps=100.0
    )
    assert got == pytest.approx(-0.005, abs=TOL)


def test_target_right_curve_keeps_stronger_shift():
    # passive, right curve at a_y = -3, vehicle abreast, limiter frozen at
    # -0.2 by steps=0: min(-0.036, -0.2) = -0.2
    state = BehaviorState(d_cl_t_prev=-0.2)
    got = target_offset(
        passive, -0.005, math.sqrt(600.0), TrafficObservation(0.0), state, steps=0.0
    )
    assert got == pytest.approx(-0.2, abs=TOL)


def test_target_release_still_uses_min():
    # traffic gone but the limited shift has not released yet: the shift
    # keeps dominating until it reaches zero
    state = BehaviorState(d_cl_t_prev=-0.1)
    got = target_offset(sportive, 0.01, 20.0, NO_TRAFFIC, state, steps=1.0)
    assert got < 0.0
    assert got == pytest.approx(-0.1 + 0.5 * 0.01 / 80.0, abs=TOL)


def test_target_after_release_cut_returns():
    state = BehaviorState(d_cl_t_prev=-1e-9)
    target_offset(sportive, 0.01, 20.0, NO_TRAFFIC, state, steps=1.0)
    assert state.d_cl_t_prev == 0.0
    got = target_offset(sportive, 0.01, 20.0, NO_TRAFFIC, state, steps=1.0)
    assert got == pytest.approx(0.699, abs=TOL)


def test_controller_tick_value():
    assert CONTROLLER_TICK == 0.01


@given(
    st.floats(-0.01, 0.01),
    st.floats(5.0, 30.0),
    st.one_of(st.none(), st.floats(0.0, 80.0)),
    st.floats(-0.218, 0.0),
)
def test_target_never_left_of_cut_under_traffic(k, v, gap, prev):
    obs = NO_TRAFFIC if gap is None else TrafficObservation(gap)
    state = BehaviorState(d_cl_t_prev=prev)
    got = target_offset(passive, k, v, obs, state, steps=1.0)
    cut = curve_cut_offset(passive, lateral_accel_preview(k, v))
    if obs.present or state.d_cl_t_prev != 0.0:
        assert got <= cut + TOL
    else:
        assert got == pytest.approx(cut, abs=TOL)
