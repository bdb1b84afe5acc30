"""The degenerate inverted half-pendulum dF/dt = sin F and the ideal layer models.

Closed form: ``tan(F(t)/2) = tan(F0/2) e^t``, equivalently
``sin F(t) = 1/cosh(t_max - t)`` with ``t_max = ln((1 + cos F0)/sin F0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ._logscale import inv_cosh, log_cosh, log_inv_cosh
from .schedule import ParamSchedule


class IntegrationError(RuntimeError):
    """An ODE integration failed to reach the requested tolerance."""


def _check_angle(F0: float) -> None:
    if not 0.0 < F0 < math.pi:
        raise ValueError(f"initial angle must lie in (0, pi), got {F0}")


def t_max(F0: float) -> float:
    _check_angle(F0)
    return math.log((1.0 + math.cos(F0)) / math.sin(F0))


def pendulum_angle(F0: float, t):
    """Exact F(t)."""
    tm = t_max(F0)
    return 2.0 * np.arctan(np.exp(np.asarray(t, dtype=np.float64) - tm))


def pendulum_sin(F0: float, t):
    """sin F(t) = 1/cosh(t_max - t)."""
    tm = t_max(F0)
    return inv_cosh(tm - np.asarray(t, dtype=np.float64))


def pendulum_numeric(F0: float, t: float, tol: float = 1e-10) -> float:
    """F(t) from adaptive Runge-Kutta integration (an oracle for the closed form)."""
    _check_angle(F0)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t == 0:
        return float(F0)
    sol = solve_ivp(
        lambda _s, y: np.sin(y),
        (0.0, float(t)),
        [float(F0)],
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
    )
    if not sol.success:
        raise IntegrationError(sol.message)
    return float(sol.y[0, -1])


def cos_integral(F0: float, t):
    """Integral of cos F(s) over [0, t] = ln(cosh(t_max) / cosh(t_max - t))."""
    tm = t_max(F0)
    return log_cosh(tm) - log_cosh(tm - np.asarray(t, dtype=np.float64))


@dataclass(frozen=True)
class IdealLayerModel:
    """Frozen-background approximation of layer n (n >= 2).

    The previous layer is frozen at its final state, so the offset angle
    ``a_{n-1}(1) Xi_0`` follows the pendulum with rate ``M_{n-1}`` and the time
    scale is chosen so that its maximum sits at the middle of ``[t_n, 1]``.
    """

    n: int
    hat_t_max: float
    log_scale: float  # ln(C) * E_n
    k_max: float
    a_prev_final: float

    @classmethod
    def from_schedule(cls, sched: ParamSchedule, n: int) -> "IdealLayerModel":
        if not 2 <= n <= sched.N:
            raise ValueError(f"ideal model needs 2 <= n <= N, got {n}")
        return cls(
            n=n,
            hat_t_max=float(sched.hat_t_max[n]),
            log_scale=sched.log_scale(n),
            k_max=sched.k_max,
            a_prev_final=sched.a_final(n - 1),
        )

    def initial_angle(self) -> float:
        # arcsin(C^{-k_max E_n}) via the tangent half-angle: tan(F0/2) = e^{-hat_t_max}
        return 2.0 * math.atan(math.exp(-self.hat_t_max))

    def angle(self, hat_t):
        """a_{n-1}(1) Xi_0 at rescaled time hat_t."""
        ht = np.asarray(hat_t, dtype=np.float64)
        return 2.0 * np.arctan(np.exp(self.hat_t_max * (2.0 * ht - 1.0)))

    def xi(self, hat_t):
        return self.angle(hat_t) / self.a_prev_final


def ideal_xi(model: IdealLayerModel, hat_t):
    """sin(a_{n-1}(1) Xi_0) = 1/cosh(hat_t_max (1 - 2 hat_t))."""
    return inv_cosh(model.hat_t_max * (1.0 - 2.0 * np.asarray(hat_t, dtype=np.float64)))


def ideal_k(model: IdealLayerModel, hat_t):
    """Ideal aspect exponent k_n at rescaled time hat_t, evaluated in log space."""
    ht = np.asarray(hat_t, dtype=np.float64)
    return model.k_max + log_inv_cosh(model.hat_t_max * (1.0 - 2.0 * ht)) / model.log_scale


def limit_profile(hat_t, k_max: float):
    """The tent k_max (1 - |1 - 2 hat_t|)."""
    return k_max * (1.0 - np.abs(1.0 - 2.0 * np.asarray(hat_t, dtype=np.float64)))
