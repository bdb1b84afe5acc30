import numpy as np
import pytest

from layered_blowup.schedule import ScheduleConfig
from layered_blowup.verify import (
    CheckResult,
    SuiteReport,
    blowup_tracker,
    convergence_probe,
    critical_alpha,
    ideal_distances,
    residual_times,
    run_invariant_suite,
)

from .conftest import DESK


@pytest.fixture(scope="module")
def single_suite(single_chain):
    return run_invariant_suite(single_chain, seed=0, residual=False)


def test_single_layer_suite_passes(single_suite):
    assert single_suite.passed, single_suite.lines()


def test_suite_is_deterministic(single_chain, single_suite):
    again = run_invariant_suite(single_chain, seed=0, residual=False)
    assert [c.measured for c in again.checks] == [c.measured for c in single_suite.checks]


def test_every_check_reports_its_tolerance(single_suite):
    for c in single_suite.checks:
        line = c.line()
        assert line.startswith(("PASS ", "FAIL ")) and c.name in line and c.relation in line


def test_fault_injection_is_caught(desk_chain):
    bad = run_invariant_suite(desk_chain.with_k_offset(2, 1e-3), residual=False)
    assert "k_terminal_zero" in {c.name for c in bad.failures()}


def test_report_lookup():
    rep = SuiteReport([CheckResult("a", True, 0.0, 1.0), CheckResult("b", False, 2.0, 1.0)])
    assert rep["b"].measured == 2.0 and not rep.passed
    assert rep.lines()[1] == "FAIL b: measured=2 <= 1"
    with pytest.raises(KeyError):
        rep["c"]


def test_residual_times_cover_windows(desk_chain):
    ts = residual_times(desk_chain, 2)
    assert len(ts) == 5 and all(0 < t < 1 for t in ts)
    assert any(t < 0.5 for t in ts) and any(t > 0.5 for t in ts)


def test_ideal_distance_is_tiny_at_desk_scale(desk_chain):
    dk, dxi = ideal_distances(desk_chain, 2, samples=401)
    assert dk < 1e-12 and dxi < 1e-11


def test_blowup_tracker_layers(desk_chain, desk_schedule):
    rep = blowup_tracker(desk_chain)
    assert rep.integral_ok() and rep.M_increasing()
    for L in rep.layers:
        assert L.grad_rho_integral == pytest.approx(2 * L.M, rel=1e-6)
        assert L.grad_rho_at_switch == 0.0
        assert 0.9 <= L.omega_ratio <= 1.5
    # layer 1 vorticity superposes on layer 2's grid
    assert rep.layers[1].omega_total_ratio >= rep.layers[1].omega_ratio


def test_critical_alpha():
    assert critical_alpha() == pytest.approx(np.sqrt(4 / 3) - 1, abs=1e-16)


def test_probe_pool_matches_serial():
    cfg = ScheduleConfig(**DESK)
    serial = convergence_probe(cfg, [8.0, 16.0], samples=201)
    pooled = convergence_probe(cfg, [8.0, 16.0], samples=201, workers=2)
    assert (serial.k_distance, serial.xi_distance) == (pooled.k_distance, pooled.xi_distance)
