import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from layered_blowup import _accel

NUMBA = _accel.load_numba_kernels()
needs_numba = pytest.mark.skipif(NUMBA is None, reason="numba unavailable")

finite = st.floats(-80.0, 80.0, allow_nan=False)


@needs_numba
@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-0.5, 1.5)))
def test_transition_backends_agree(x):
    a, b = _accel.transition_np(x), NUMBA["transition"](x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(a))))


@needs_numba
@given(arrays(np.float64, st.integers(1, 64), elements=finite), st.floats(0.05, 2.0))
def test_profile_and_cutoff_backends_agree(y, lam):
    np.testing.assert_allclose(_accel.cutoff_np(y), NUMBA["cutoff"](y), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(_accel.profile_np(y, lam), NUMBA["profile"](y, lam), rtol=1e-12, atol=1e-13)


@needs_numba
@given(arrays(np.float64, (12, 9), elements=st.floats(-1e3, 1e3)), st.integers(1, 8), st.integers(0, 1))
def test_shift_kernel_backends_agree(F, shift, axis):
    shift = min(shift, F.shape[axis] - 1)
    assert _accel.shift_absdiff_max_np(F, shift, axis) == NUMBA["shift_absdiff_max"](F, shift, axis)


@needs_numba
def test_pair_kernel_backends_agree():
    rng = np.random.default_rng(3)
    flat = rng.standard_normal(500)
    ia, ib = rng.integers(0, 500, 2000), rng.integers(0, 500, 2000)
    denom = rng.uniform(0.1, 1.0, 2000)
    assert _accel.pair_quotient_max_np(flat, ia, ib, denom) == NUMBA["pair_quotient_max"](flat, ia, ib, denom)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv(_accel.ENV_FLAG, "1")
    assert not _accel.numba_requested()
    monkeypatch.setenv(_accel.ENV_FLAG, "0")
    assert _accel.numba_requested()


def test_profile_rows_are_derivatives():
    lam, y, h = 0.7, np.linspace(-60, 60, 401), 1e-5
    rows = _accel.profile_np(y, lam)
    up, dn = _accel.profile_np(y + h, lam), _accel.profile_np(y - h, lam)
    for k in range(3):
        np.testing.assert_allclose((up[k] - dn[k]) / (2 * h), rows[k + 1], atol=1e-6)
    # rows 4, 5 hold the cosine profile and its derivative
    np.testing.assert_allclose((up[4] - dn[4]) / (2 * h), rows[5], atol=1e-6)


def test_numpy_transition_accepts_scalars():
    out = _accel.transition_np(0.3)
    assert out.shape == (4,)
    np.testing.assert_array_equal(out, _accel.transition_np(np.array([0.3]))[:, 0])
    assert _accel.transition_np(2.0).tolist() == [1.0, 0.0, 0.0, 0.0]
