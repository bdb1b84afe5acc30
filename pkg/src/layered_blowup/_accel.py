"""Hot numerical kernels with a numba and a pure-numpy implementation.

The numba versions are used when numba imports cleanly and the environment
variable ``LAYERED_BLOWUP_NO_NUMBA`` is unset (or set to ``0``).  Both
backends compute the same quantities; the test-suite compares them.
"""

from __future__ import annotations

import math
import os

import numpy as np

ENV_FLAG = "LAYERED_BLOWUP_NO_NUMBA"

_PLATEAU = 8.0 * math.pi
_EDGE = 16.0 * math.pi
_EXP_CAP = 700.0


# ---------------------------------------------------------------- numpy ---


def transition_np(x):
    """Smooth step and its first three derivatives, vectorised.

    Returns an array of shape ``(4,) + x.shape``.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    x = x.reshape(-1)  # 0-d input would make out[i] a scalar
    out = np.zeros((4, x.size))
    out[0][x >= 1.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    if not np.any(mid):
        return out.reshape((4,) + shape)
    xm = x[mid]
    u = 1.0 - xm
    with np.errstate(over="ignore", divide="ignore"):
        s = 1.0 / u - 1.0 / xm  # +-inf for subnormal distances saturates below
    live = np.abs(s) < _EXP_CAP
    # beyond the cap the logistic weight is below 1e-300: saturate exactly
    p = np.where(live, 1.0 / (1.0 + np.exp(np.where(live, -s, 0.0))), (s > 0).astype(np.float64))
    q = np.where(live, 1.0 / (1.0 + np.exp(np.where(live, s, 0.0))), (s < 0).astype(np.float64))
    v = p * q
    xs = np.where(live, xm, 0.5)
    us = 1.0 - xs
    s1 = 1.0 / us**2 + 1.0 / xs**2
    s2 = 2.0 / us**3 - 2.0 / xs**3
    s3 = 6.0 / us**4 + 6.0 / xs**4
    w = 1.0 - 2.0 * p
    d1 = v * s1
    d2 = v * (w * s1 * s1 + s2)
    d3 = v * ((1.0 - 6.0 * p + 6.0 * p * p) * s1**3 + 3.0 * w * s1 * s2 + s3)
    out[0][mid] = p
    out[1][mid] = np.where(live, d1, 0.0)
    out[2][mid] = np.where(live, d2, 0.0)
    out[3][mid] = np.where(live, d3, 0.0)
    return out.reshape((4,) + shape)


def cutoff_np(x):
    """Cutoff bump value and first three derivatives, shape ``(4,) + x.shape``."""
    x = np.asarray(x, dtype=np.float64)
    width = _EDGE - _PLATEAU
    th = transition_np((_EDGE - np.abs(x)) / width)
    sgn = np.sign(x)
    return np.stack(
        [th[0], -sgn * th[1] / width, th[2] / width**2, -sgn * th[3] / width**3]
    )


def profile_np(y, lam):
    """Derivatives of ``cutoff(lam*y)*sin(y)`` and ``cutoff(lam*y)*cos(y)``.

    Row order: sin-profile orders 0..3, then cos-profile orders 0..3.
    """
    y = np.asarray(y, dtype=np.float64)
    P0, P1, P2, P3 = cutoff_np(lam * y)
    s = np.sin(y)
    c = np.cos(y)
    l2 = lam * lam
    l3 = l2 * lam
    return np.stack(
        [
            P0 * s,
            lam * P1 * s + P0 * c,
            l2 * P2 * s + 2.0 * lam * P1 * c - P0 * s,
            l3 * P3 * s + 3.0 * l2 * P2 * c - 3.0 * lam * P1 * s - P0 * c,
            P0 * c,
            lam * P1 * c - P0 * s,
            l2 * P2 * c - 2.0 * lam * P1 * s - P0 * c,
            l3 * P3 * c - 3.0 * l2 * P2 * s - 3.0 * lam * P1 * c + P0 * s,
        ]
    )


def shift_absdiff_max_np(f, shift, axis):
    """max |f[i+shift] - f[i]| along ``axis`` of a 2-D array."""
    if shift <= 0 or shift >= f.shape[axis]:
        return 0.0
    if axis == 0:
        d = f[shift:, :] - f[:-shift, :]
    else:
        d = f[:, shift:] - f[:, :-shift]
    return float(np.max(np.abs(d)))


def pair_quotient_max_np(flat, ia, ib, denom):
    """max over k of |flat[ia[k]] - flat[ib[k]]| / denom[k]."""
    if ia.size == 0:
        return 0.0
    return float(np.max(np.abs(flat[ia] - flat[ib]) / denom))


# ---------------------------------------------------------------- numba ---


def _build_numba():
    from numba import njit

    @njit(cache=False)
    def _transition_scalar(x):
        if x <= 0.0:
            return 0.0, 0.0, 0.0, 0.0
        if x >= 1.0:
            return 1.0, 0.0, 0.0, 0.0
        u = 1.0 - x
        s = 1.0 / u - 1.0 / x
        if s >= _EXP_CAP:
            return 1.0, 0.0, 0.0, 0.0
        if s <= -_EXP_CAP:
            return 0.0, 0.0, 0.0, 0.0
        p = 1.0 / (1.0 + math.exp(-s))
        q = 1.0 / (1.0 + math.exp(s))
        v = p * q
        s1 = 1.0 / (u * u) + 1.0 / (x * x)
        s2 = 2.0 / (u * u * u) - 2.0 / (x * x * x)
        s3 = 6.0 / (u * u * u * u) + 6.0 / (x * x * x * x)
        w = 1.0 - 2.0 * p
        d1 = v * s1
        d2 = v * (w * s1 * s1 + s2)
        d3 = v * ((1.0 - 6.0 * p + 6.0 * p * p) * s1 * s1 * s1 + 3.0 * w * s1 * s2 + s3)
        return p, d1, d2, d3

    @njit(cache=False)
    def transition_nb(x):
        flat = x.ravel()
        out = np.zeros((4, flat.size))
        for i in range(flat.size):
            a, b, c, d = _transition_scalar(flat[i])
            out[0, i] = a
            out[1, i] = b
            out[2, i] = c
            out[3, i] = d
        return out

    @njit(cache=False)
    def _cutoff_scalar(x):
        width = _EDGE - _PLATEAU
        ax = abs(x)
        p, d1, d2, d3 = _transition_scalar((_EDGE - ax) / width)
        sg = 0.0
        if x > 0.0:
            sg = 1.0
        elif x < 0.0:
            sg = -1.0
        return p, -sg * d1 / width, d2 / (width * width), -sg * d3 / (width * width * width)

    @njit(cache=False)
    def cutoff_nb(x):
        flat = x.ravel()
        out = np.zeros((4, flat.size))
        for i in range(flat.size):
            a, b, c, d = _cutoff_scalar(flat[i])
            out[0, i] = a
            out[1, i] = b
            out[2, i] = c
            out[3, i] = d
        return out

    @njit(cache=False)
    def profile_nb(y, lam):
        flat = y.ravel()
        n = flat.size
        out = np.empty((8, n))
        l2 = lam * lam
        l3 = l2 * lam
        for i in range(n):
            P0, P1, P2, P3 = _cutoff_scalar(lam * flat[i])
            s = math.sin(flat[i])
            c = math.cos(flat[i])
            out[0, i] = P0 * s
            out[1, i] = lam * P1 * s + P0 * c
            out[2, i] = l2 * P2 * s + 2.0 * lam * P1 * c - P0 * s
            out[3, i] = l3 * P3 * s + 3.0 * l2 * P2 * c - 3.0 * lam * P1 * s - P0 * c
            out[4, i] = P0 * c
            out[5, i] = lam * P1 * c - P0 * s
            out[6, i] = l2 * P2 * c - 2.0 * lam * P1 * s - P0 * c
            out[7, i] = l3 * P3 * c - 3.0 * l2 * P2 * s - 3.0 * lam * P1 * c + P0 * s
        return out

    @njit(cache=False)
    def shift_absdiff_max_nb(f, shift, axis):
        nx, ny = f.shape
        best = 0.0
        if axis == 0:
            if shift <= 0 or shift >= nx:
                return 0.0
            for i in range(nx - shift):
                for j in range(ny):
                    d = abs(f[i + shift, j] - f[i, j])
                    if d > best:
                        best = d
        else:
            if shift <= 0 or shift >= ny:
                return 0.0
            for i in range(nx):
                for j in range(ny - shift):
                    d = abs(f[i, j + shift] - f[i, j])
                    if d > best:
                        best = d
        return best

    @njit(cache=False)
    def pair_quotient_max_nb(flat, ia, ib, denom):
        best = 0.0
        for k in range(ia.size):
            d = abs(flat[ia[k]] - flat[ib[k]]) / denom[k]
            if d > best:
                best = d
        return best

    return {
        "transition": lambda x: transition_nb(np.asarray(x, dtype=np.float64)).reshape(
            (4,) + np.shape(x)
        ),
        "cutoff": lambda x: cutoff_nb(np.asarray(x, dtype=np.float64)).reshape(
            (4,) + np.shape(x)
        ),
        "profile": lambda y, lam: profile_nb(np.asarray(y, dtype=np.float64), float(lam)).reshape(
            (8,) + np.shape(y)
        ),
        "shift_absdiff_max": lambda f, s, axis: float(
            shift_absdiff_max_nb(np.ascontiguousarray(f, dtype=np.float64), int(s), int(axis))
        ),
        "pair_quotient_max": lambda flat, ia, ib, denom: float(
            pair_quotient_max_nb(
                np.ascontiguousarray(flat, dtype=np.float64),
                np.ascontiguousarray(ia, dtype=np.int64),
                np.ascontiguousarray(ib, dtype=np.int64),
                np.ascontiguousarray(denom, dtype=np.float64),
            )
        ),
    }


NUMPY_KERNELS = {
    "transition": transition_np,
    "cutoff": cutoff_np,
    "profile": profile_np,
    "shift_absdiff_max": shift_absdiff_max_np,
    "pair_quotient_max": pair_quotient_max_np,
}


def numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() in ("", "0", "false", "no")


def load_numba_kernels():
    """Return the numba kernel table, or ``None`` if numba is unavailable."""
    try:
        return _build_numba()
    except ImportError:
        return None


_NUMBA_KERNELS = load_numba_kernels() if numba_requested() else None
KERNELS = _NUMBA_KERNELS if _NUMBA_KERNELS is not None else NUMPY_KERNELS
BACKEND = "numba" if _NUMBA_KERNELS is not None else "numpy"

transition = KERNELS["transition"]
cutoff = KERNELS["cutoff"]
profile = KERNELS["profile"]
shift_absdiff_max = KERNELS["shift_absdiff_max"]
pair_quotient_max = KERNELS["pair_quotient_max"]
