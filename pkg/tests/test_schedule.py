import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layered_blowup._logscale import arccosh_exp, inv_cosh, log_inv_cosh
from layered_blowup.schedule import (
    ScheduleConfig,
    ScheduleError,
    anchor_constant,
    feasibility_margins,
    optimal_exponents,
    plan,
)

from .conftest import DESK


def test_critical_exponents_solve_reduced_system():
    crit = optimal_exponents()
    assert abs(crit.alpha_star - (math.sqrt(4 / 3) - 1)) <= 1e-15
    assert crit.lambda_star == pytest.approx(crit.alpha_star * (1 + crit.alpha_star), abs=1e-16)
    assert abs(1 - crit.k_max_star - crit.lambda_star - 2 / 3) <= 1e-15
    assert max(map(abs, crit.reduced_residuals())) <= 1e-15


def test_critical_sign_condition():
    crit = optimal_exponents()
    assert -1 + 2 * crit.lambda_star + 3 * crit.k_max_star < 0


def test_anchor_matches_50_digit_evaluation():
    mpmath.mp.dps = 50
    k = mpmath.sqrt(mpmath.mpf(4) / 3) - 1
    C, delta = mpmath.mpf(10), mpmath.mpf("0.05")
    exact = 2 * C ** (-delta) * mpmath.acosh(C ** (2 * k))
    got = anchor_constant(10.0, 0.5, 0.05, optimal_exponents().k_max_star)
    assert abs(got - float(exact)) <= 4e-16 * float(exact)
    sched = plan(ScheduleConfig(**{**DESK, "N": 1}))
    assert sched.y_regime == "anchored"
    assert sched.Y == got
    assert sched.t[1] == 0.0


def test_desk_schedule_values(desk_schedule):
    s = desk_schedule
    assert (s.y_regime, s.final_regime) == ("desk", "desk")
    np.testing.assert_allclose(s.t[1:], [0.0, 0.5, 0.995], rtol=0, atol=1e-15)
    np.testing.assert_allclose(s.M, [7.498, 8.413, 10.591, 16.786], atol=5e-4)
    assert np.all(s.z[1:] / s.M[1:] == 2.0)


def test_plan_is_bit_deterministic():
    a, b = plan(ScheduleConfig(**DESK)), plan(ScheduleConfig(**DESK))
    for name in ("t", "M", "lam", "E", "hat_t_max", "log_M"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)
    assert a.Y == b.Y


def test_plan_accepts_mapping_with_auto():
    s = plan({**DESK, "k_max": "auto", "Lambda": "auto"})
    assert s.k_max == optimal_exponents().k_max_star


@pytest.mark.parametrize(
    "override",
    [{"gamma": 0.4}, {"gamma": 1.0}, {"C": 2.0}, {"zeta": 0.3}, {"eps": 0.0}, {"delta": 0.0},
     {"k_max": 0.001}, {"Lambda": 1.5}, {"N": 0}, {"N": 3}],
)
def test_invalid_configs_are_rejected(override):
    with pytest.raises(ScheduleError):
        plan(ScheduleConfig(**{**DESK, **override}))


def test_huge_N_reports_log_scale_need():
    with pytest.raises(ScheduleError, match="log-scale"):
        plan(ScheduleConfig(**{**DESK, "C": 1e6, "gamma": 0.9, "N": 6}))


@given(
    C=st.floats(3.0, 1e4),
    gamma=st.floats(0.5, 0.8),
    delta=st.floats(0.01, 0.5),
    N=st.integers(1, 4),
)
def test_planned_schedules_satisfy_invariants(C, gamma, delta, N):
    try:
        s = plan(ScheduleConfig(C=C, gamma=gamma, delta=delta, N=N))
    except ScheduleError:
        return
    t = s.t[1:]
    assert t[0] == 0.0
    assert np.all(np.diff(t) > 0)
    omt = 1.0 - t
    assert np.all(omt[1:] / omt[:-1] < 1.0)
    assert np.all(s.z[1:] == 2.0 * s.M[1:])
    assert np.all(np.diff(s.M[1:]) > 0)


def test_feasible_margins_near_gamma_one():
    crit = optimal_exponents()
    cfg = ScheduleConfig(gamma=0.999, mu=1e-3, delta=1e-3, zeta=1e-3)
    rep = feasibility_margins(cfg, 0.9 * crit.alpha_star)
    assert rep.passed, rep.failing()


def test_gamma_099_fails_only_the_transport_inequalities():
    crit = optimal_exponents()
    cfg = ScheduleConfig(gamma=0.99, mu=1e-3, delta=1e-3, zeta=1e-3)
    rep = feasibility_margins(cfg, 0.9 * crit.alpha_star)
    assert rep.failing() == ["5_density_transport_c", "10_vorticity_transport_a"]


def test_above_critical_alpha_is_infeasible():
    cfg = ScheduleConfig(gamma=0.999, mu=1e-3, delta=1e-3, zeta=1e-3)
    assert not feasibility_margins(cfg, 1.1 * optimal_exponents().alpha_star).passed


@given(st.floats(0.0, 5000.0))
def test_arccosh_exp_matches_mpmath(L):
    mpmath.mp.dps = 40
    exact = mpmath.acosh(mpmath.exp(mpmath.mpf(L)))
    assert arccosh_exp(L) == pytest.approx(float(exact), rel=1e-14, abs=1e-15)


@given(st.floats(-700.0, 700.0))
def test_inv_cosh_forms(z):
    assert inv_cosh(z) == pytest.approx(1.0 / math.cosh(z), rel=1e-14)
    assert log_inv_cosh(z) == pytest.approx(-math.log(math.cosh(z)), rel=1e-14, abs=1e-15)


def test_log_inv_cosh_beyond_double_range():
    assert log_inv_cosh(1e5) == pytest.approx(-1e5 + math.log(2.0), rel=1e-15)
