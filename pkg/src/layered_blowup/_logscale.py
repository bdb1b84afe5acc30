"""Overflow-safe elementary functions for superexponentially scaled quantities."""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)
# above this log-argument arccosh(e^L) uses its asymptotic series
_ARCCOSH_SWITCH = math.log(1e8)
LINEAR_LOG_LIMIT = 700.0


def arccosh_exp(log_x):
    """arccosh(exp(log_x)) for log_x >= 0 without forming exp(log_x) when large."""
    L = np.asarray(log_x, dtype=np.float64)
    if np.any(L < 0):
        raise ValueError("arccosh_exp needs log_x >= 0")
    big = L > _ARCCOSH_SWITCH
    Ls = np.where(big, 0.0, L)
    xm1 = np.expm1(Ls)
    small = np.log1p(xm1 + np.sqrt(xm1 * (xm1 + 2.0)))
    e2 = np.exp(-2.0 * np.where(big, L, 0.0))
    asym = L + LN2 - e2 / 4.0 - 3.0 * e2 * e2 / 32.0
    out = np.where(big, asym, small)
    return float(out) if out.ndim == 0 else out


def inv_cosh(z):
    """1/cosh(z) as 2 e^{-|z|} / (1 + e^{-2|z|})."""
    a = np.abs(np.asarray(z, dtype=np.float64))
    e = np.exp(-a)
    out = 2.0 * e / (1.0 + e * e)
    return float(out) if out.ndim == 0 else out


def log_inv_cosh(z):
    """ln(1/cosh(z)) = -|z| + ln 2 - ln(1 + e^{-2|z|})."""
    a = np.abs(np.asarray(z, dtype=np.float64))
    out = -a + LN2 - np.log1p(np.exp(-2.0 * a))
    return float(out) if out.ndim == 0 else out


def log_cosh(z):
    return -log_inv_cosh(z)


def materialize(log_value):
    """exp(log_value), refusing values that would leave double range."""
    lv = np.asarray(log_value, dtype=np.float64)
    if np.any(np.abs(lv) >= LINEAR_LOG_LIMIT):
        raise OverflowError(f"log magnitude {float(np.max(np.abs(lv))):.1f} exceeds {LINEAR_LOG_LIMIT}")
    out = np.exp(lv)
    return float(out) if out.ndim == 0 else out
