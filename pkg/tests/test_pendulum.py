import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from layered_blowup.pendulum import (
    IdealLayerModel,
    cos_integral,
    ideal_k,
    ideal_xi,
    limit_profile,
    pendulum_angle,
    pendulum_numeric,
    pendulum_sin,
    t_max,
)

angles = st.floats(0.01, math.pi - 0.01)


def test_t_max_values():
    assert t_max(math.pi / 2) == pytest.approx(0.0, abs=1e-16)
    assert t_max(0.1) == pytest.approx(math.log((1 + math.cos(0.1)) / math.sin(0.1)))
    with pytest.raises(ValueError):
        t_max(0.0)


@given(angles, st.floats(0.0, 6.0))
def test_closed_form_matches_runge_kutta(F0, t):
    assert pendulum_numeric(F0, t, tol=1e-12) == pytest.approx(float(pendulum_angle(F0, t)), abs=1e-9)


@given(angles, st.floats(0.0, 5.0))
def test_sin_profile_is_symmetric_about_peak(F0, s):
    tm = t_max(F0)
    assert pendulum_sin(F0, tm + s) == pytest.approx(pendulum_sin(F0, tm - s), rel=1e-13)
    assert pendulum_sin(F0, tm) == 1.0


@given(angles, st.floats(0.0, 6.0))
def test_cos_integral_identity(F0, t):
    lhs = math.exp(cos_integral(F0, t)) * math.sin(F0)
    assert lhs == pytest.approx(float(pendulum_sin(F0, t)), rel=1e-12)


@pytest.mark.parametrize("F0", [0.1, 0.5, math.pi / 2, 2.5])
def test_cos_integral_against_quadrature(F0):
    for t in (0.3, 1.0, 3.0):
        ref, _ = quad(lambda s: math.cos(pendulum_angle(F0, s)), 0.0, t, epsabs=1e-13, epsrel=1e-13)
        assert cos_integral(F0, t) == pytest.approx(ref, abs=1e-11)


def test_ideal_model_endpoints(desk_schedule):
    m = IdealLayerModel.from_schedule(desk_schedule, 2)
    assert ideal_k(m, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert ideal_k(m, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert ideal_k(m, 0.5) == pytest.approx(m.k_max, abs=1e-15)
    assert ideal_xi(m, 0.5) == 1.0
    assert m.angle(0.5) == pytest.approx(math.pi / 2, abs=1e-15)
    assert m.angle(0.0) == pytest.approx(m.initial_angle(), abs=1e-15)
    # the initial angle is arcsin(C^{-k_max E_n})
    assert math.sin(m.initial_angle()) == pytest.approx(math.exp(-m.k_max * m.log_scale), rel=1e-14)


def test_ideal_k_approaches_tent(desk_schedule):
    m = IdealLayerModel.from_schedule(desk_schedule, 2)
    hat = np.linspace(0, 1, 1001)
    gap = np.max(np.abs(ideal_k(m, hat) - limit_profile(hat, m.k_max)))
    assert gap <= 2 * math.log(2) / m.log_scale


def test_ideal_model_needs_a_previous_layer(desk_schedule):
    with pytest.raises(ValueError):
        IdealLayerModel.from_schedule(desk_schedule, 1)
