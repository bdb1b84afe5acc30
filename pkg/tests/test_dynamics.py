import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from layered_blowup import _accel
from layered_blowup.dynamics import (
    DomainError,
    RampProfile,
    amplitude_time_derivatives,
    ramp,
    transition,
    transition_integral,
)
from layered_blowup.pendulum import IdealLayerModel, ideal_k


@given(st.floats(-5.0, 5.0))
def test_transition_is_a_monotone_step(x):
    v = transition(x)
    assert 0.0 <= v <= 1.0
    if x <= 0:
        assert v == 0.0
    if x >= 1:
        assert v == 1.0
    assert transition(x + 1e-3) >= v


@given(st.floats(0.02, 0.98))
def test_transition_derivatives_match_differences(x):
    h = 1e-5
    rows = _accel.transition_np(np.array([x - h, x, x + h]))
    for k in range(3):
        fd = (rows[k, 2] - rows[k, 0]) / (2 * h)
        assert fd == pytest.approx(rows[k + 1, 1], rel=1e-5, abs=1e-5 * (1 + abs(rows[k + 1, 1])))


def _mp_transition(x):
    if x <= 0:
        return mpmath.mpf(0)
    if x >= 1:
        return mpmath.mpf(1)
    return 1 / (1 + mpmath.exp(1 / x - 1 / (1 - x)))


@settings(max_examples=25)
@given(st.floats(0.0, 3.0))
def test_transition_integral_against_mpmath(y):
    mpmath.mp.dps = 30
    nodes = [0, min(y, 0.5), min(y, 1.0), y]
    ref = float(mpmath.quad(_mp_transition, nodes))
    assert float(transition_integral(y)[0]) == pytest.approx(ref, abs=1e-14)


def test_ramp_shape(desk_schedule):
    s = desk_schedule
    for n in (1, 2):
        r = RampProfile.from_schedule(s, n)
        assert r.length == pytest.approx(s.zeta * s.one_minus_t(n))
        assert ramp(r, r.t_on)["h"] == 0.0
        assert ramp(r, r.t_off)["h"] == 0.0
        assert ramp(r, 1.0)["h"] == 0.0
        mid = 0.5 * (r.t_on + r.t_off)
        assert 1 - 2 * s.eps <= ramp(r, mid)["h"] <= 1.0
        assert ramp(r, mid)["dh_dt"] == 0.0
        # h is the integral of dh/dt
        t = np.linspace(r.t_on, r.t_on + r.length, 7)
        for ti in t:
            ref, _ = quad(lambda u: float(r.dh_dt(u)[0]), r.t_on, ti, epsabs=1e-14, limit=200)
            assert float(r.h(ti)[0]) == pytest.approx(ref, abs=1e-10)
        # down ramp mirrors the up ramp
        d = np.linspace(0.0, r.length, 11)
        np.testing.assert_allclose(r.h(r.t_on + d), r.h(r.t_off - d), atol=1e-15)


def test_layer_one_is_frozen(desk_chain, desk_schedule):
    s = desk_schedule
    ts = np.linspace(0.0, 1.0, 9)
    assert np.all(desk_chain.k(1, ts) == 0.0)
    expected = math.asin(math.exp(-s.log_scale(1, s.k_max))) / s.C
    assert desk_chain.center_one == pytest.approx(expected, rel=1e-15)


def test_aspect_conservation_and_endpoint(desk_chain, desk_schedule):
    s = desk_schedule
    for n in (1, 2):
        ts = np.linspace(s.t[n], 1.0, 101)
        np.testing.assert_allclose(desk_chain.log_a(n, ts) + desk_chain.log_b(n, ts),
                                   2 * s.log_scale(n), rtol=0, atol=1e-12)
        assert abs(float(desk_chain.k(n, 1.0))) <= 1e-12
        assert float(desk_chain.B_times_a2b2(n, 1.0)) == pytest.approx(2 * s.M[n], rel=1e-13)


def test_layer_two_matches_ideal_model(desk_chain, desk_schedule):
    s = desk_schedule
    model = IdealLayerModel.from_schedule(s, 2)
    hat = np.linspace(0, 1, 501)
    t = s.t[2] + s.one_minus_t(2) * hat
    sol = desk_chain.layers[2]
    assert np.max(np.abs(sol.angle(t) - model.angle(hat))) < 1e-10
    assert np.max(np.abs(desk_chain.k(2, t) - ideal_k(model, hat))) < 1e-10
    peak = float(np.sin(sol.angle(s.t[2] + 0.5 * s.one_minus_t(2))))
    assert peak == pytest.approx(1.0, abs=1e-6)


def test_amplitude_inactive_before_start(desk_chain, desk_schedule):
    st_ = desk_chain.state(2, 0.25)
    assert not st_.active and st_.B == 0.0 and st_.K == 0.0
    with pytest.raises(DomainError):
        desk_chain.layers[2].angle(0.25)


def test_amplitude_derivatives_after_switch_off(desk_chain, desk_schedule):
    # only the sum is frozen; for n >= 2 the aspect ratio keeps moving
    t = 0.5 * (desk_schedule.t[3] + 1.0)
    d1 = amplitude_time_derivatives(desk_chain, 1, 0.75)
    assert d1 == {"d_Bn_sum": 0.0, "d_Bn_a2": 0.0, "d_Bn_b2": 0.0}
    d2 = amplitude_time_derivatives(desk_chain, 2, t)
    assert d2["d_Bn_sum"] == 0.0
    assert d2["d_Bn_a2"] == pytest.approx(-d2["d_Bn_b2"], rel=1e-12)
    assert abs(d2["d_Bn_a2"]) > 0.0


def test_amplitude_derivative_by_differences(desk_chain, desk_schedule):
    n = 2
    for t in (0.502, 0.7, 0.99):
        d = amplitude_time_derivatives(desk_chain, n, t)
        h = 1e-7

        def pieces(s):
            st_ = desk_chain.state(n, s)
            return st_.B * st_.a ** 2, st_.B * st_.b ** 2

        lo, hi = pieces(t - h), pieces(t + h)
        scale = abs(d["d_Bn_a2"]) + abs(d["d_Bn_b2"])
        assert (hi[0] - lo[0]) / (2 * h) == pytest.approx(d["d_Bn_a2"], abs=1e-5 * scale)
        assert (hi[1] - lo[1]) / (2 * h) == pytest.approx(d["d_Bn_b2"], abs=1e-5 * scale)


def test_k_offset_injection(desk_chain):
    shifted = desk_chain.with_k_offset(2, 1e-3)
    assert float(shifted.k(2, 1.0)) == pytest.approx(1e-3, abs=1e-12)
    assert float(shifted.k(1, 1.0)) == 0.0


def test_center_offsets_stay_confined(desk_chain, desk_schedule):
    for t in np.linspace(desk_schedule.t[2], 1.0, 41):
        a1 = desk_chain.state(1, t).a
        assert abs(desk_chain.offset(2, 1, t)) * a1 <= 8 * math.pi
