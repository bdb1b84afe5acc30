"""Critical exponents and the deterministic parameter plan.

Every scale of the construction has the form ``C ** (x * E_n)`` with
``E_n = (1/(1-gamma))**n``.  Such magnitudes are stored as natural logs next
to their linear values; linear values are only formed when they fit a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping

import numpy as np

from ._logscale import LINEAR_LOG_LIMIT, arccosh_exp


class ScheduleError(ValueError):
    """Raised for configurations that violate the construction's requirements."""


@dataclass(frozen=True)
class CriticalExponents:
    alpha_star: float
    lambda_star: float
    k_max_star: float

    def reduced_residuals(self) -> tuple[float, float, float]:
        """Residuals of the three reduced equations at the critical point."""
        a, L, k = self.alpha_star, self.lambda_star, self.k_max_star
        return (a - k, a - (1.0 - 2.0 * L - 3.0 * k) / (1.0 + k), a - L / (1.0 + k))


def optimal_exponents() -> CriticalExponents:
    """Positive root of a^2 + 2a - 1/3 = 0 and the matching Lambda, k_max."""
    alpha = math.sqrt(4.0 / 3.0) - 1.0
    return CriticalExponents(alpha, alpha * (1.0 + alpha), alpha)


@dataclass(frozen=True)
class ScheduleConfig:
    C: float = 10.0
    gamma: float = 0.5
    delta: float = 0.05
    mu: float = 0.01
    zeta: float = 0.01
    eps: float = 0.1
    N: int = 2
    k_max: float | None = None  # None means "auto" (critical value)
    Lambda: float | None = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> "ScheduleConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                continue
            if key in ("k_max", "Lambda"):
                kwargs[key] = None if value is None or str(value).strip().lower() == "auto" else float(value)
            elif key == "N":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class ParamSchedule:
    """Complete parameter plan; per-layer arrays are indexed by layer n = 0..N+1."""

    C: float
    gamma: float
    delta: float
    mu: float
    zeta: float
    eps: float
    N: int
    k_max: float
    Lambda: float
    Y: float
    log_C: float
    E: np.ndarray
    log_lam: np.ndarray
    lam: np.ndarray
    log_M: np.ndarray
    M: np.ndarray
    z: np.ndarray
    t: np.ndarray
    hat_t_max: np.ndarray
    y_regime: str
    final_regime: str
    notes: tuple[str, ...] = field(default=())

    @property
    def layers(self) -> range:
        return range(1, self.N + 1)

    def one_minus_t(self, n: int) -> float:
        return 1.0 - float(self.t[n])

    def log_scale(self, n: int, exponent: float = 1.0) -> float:
        """ln(C ** (exponent * E_n))."""
        return exponent * float(self.E[n]) * self.log_C

    def a_final(self, n: int) -> float:
        """a_n(1) = b_n(1) = C ** E_n (k_n(1) = 0); a_0(1) = C."""
        return math.exp(self.log_scale(n))

    def window_fraction(self, n: int) -> float:
        """(t_{n+1} - t_n)/(1 - t_n): where layer n's density switches off in rescaled time."""
        return (float(self.t[n + 1]) - float(self.t[n])) / self.one_minus_t(n)


def _validate(cfg: ScheduleConfig, k_max: float, Lam: float) -> None:
    if not cfg.C > 2.0:
        raise ScheduleError(f"C must exceed 2 (got {cfg.C})")
    if not 0.5 <= cfg.gamma < 1.0:
        raise ScheduleError(f"gamma must lie in [1/2, 1) (got {cfg.gamma})")
    if not k_max >= 0.01:
        raise ScheduleError(f"k_max must be at least 1/100 (got {k_max})")
    if not k_max < 1.0:
        raise ScheduleError(f"k_max must be below 1 (got {k_max})")
    if not 0.0 < Lam < 1.0:
        raise ScheduleError(f"Lambda must lie in (0, 1) (got {Lam})")
    for name in ("delta", "mu"):
        if not getattr(cfg, name) > 0.0:
            raise ScheduleError(f"{name} must be positive")
    for name in ("zeta", "eps"):
        if not 0.0 < getattr(cfg, name) < 0.25:
            raise ScheduleError(f"{name} must lie in (0, 1/4)")
    if cfg.N < 1:
        raise ScheduleError("N must be at least 1")


def anchor_constant(C: float, gamma: float, delta: float, k_max: float) -> float:
    """The Y that makes the time law put t_1 at exactly 0.

    ``1 - t_n = 2 arccosh(C^{k_max E_n}) / M_{n-1}`` with ``M_0 = Y C^delta``.
    """
    E1 = 1.0 / (1.0 - gamma)
    logC = math.log(C)
    return 2.0 * math.exp(-delta * logC) * arccosh_exp(k_max * E1 * logC)


def plan(config: ScheduleConfig | Mapping[str, object]) -> ParamSchedule:
    """Build and validate the parameter plan for ``config``."""
    cfg = config if isinstance(config, ScheduleConfig) else ScheduleConfig.from_mapping(config)
    crit = optimal_exponents()
    k_max = crit.k_max_star if cfg.k_max is None else float(cfg.k_max)
    Lam = crit.lambda_star if cfg.Lambda is None else float(cfg.Lambda)
    _validate(cfg, k_max, Lam)

    N = int(cfg.N)
    logC = math.log(cfg.C)
    n_idx = np.arange(N + 2, dtype=np.float64)
    E = (1.0 / (1.0 - cfg.gamma)) ** n_idx
    hat_t_max = arccosh_exp(k_max * E * logC)

    # widest layer must still fit linear doubles: a_n^2 + b_n^2 with k_n <= k_max
    worst = 2.0 * (1.0 + k_max) * E[N] * logC
    if worst > LINEAR_LOG_LIMIT - 50.0:
        raise ScheduleError(
            f"layer {N} scales reach C^{worst / logC:.1f}; this N needs a log-scale field evaluation"
        )

    notes: list[str] = []
    Y = anchor_constant(cfg.C, cfg.gamma, cfg.delta, k_max)
    y_regime = "anchored"

    def law(n: int, Yv: float) -> float:
        # 1 - t_n from the periodicity relation M_{n-1}(1 - t_n) = 2 hat_t_max_n
        return 2.0 * hat_t_max[n] / (Yv * math.exp(cfg.delta * E[n - 1] * logC))

    ramp_room = 1.0 - 2.0 * cfg.zeta
    if N >= 2 and law(2, Y) > ramp_room:
        Y = 2.0 * law(2, 1.0)  # forces 1 - t_2 = 1/2
        y_regime = "desk"
        notes.append("time law does not contract from layer 1 to 2; Y raised so that 1 - t_2 = 1/2")

    omt = np.full(N + 2, np.nan)
    omt[1] = 1.0
    for n in range(2, N + 1):
        omt[n] = law(n, Y)
        if not omt[n] <= ramp_room * omt[n - 1]:
            raise ScheduleError(
                f"time law does not contract between layers {n - 1} and {n} "
                f"((1-t_n)/(1-t_(n-1)) = {omt[n] / omt[n - 1]:.3f}); increase C or delta, or lower N"
            )
    final_regime = "law"
    last = law(N + 1, Y)
    if last <= ramp_room * omt[N]:
        omt[N + 1] = last
    else:
        omt[N + 1] = cfg.zeta * omt[N]
        final_regime = "desk"
        notes.append(f"switch-off of layer {N} placed at 1 - t = zeta (1 - t_N)")
    if omt[N + 1] < 1e-12:
        raise ScheduleError("1 - t_(N+1) underflows double precision time; needs a log-time fallback")

    t = 1.0 - omt
    t[0] = np.nan
    t[1] = 0.0
    log_M = math.log(Y) + cfg.delta * E * logC
    M = np.exp(log_M)
    log_lam = -Lam * E * logC
    return ParamSchedule(
        C=float(cfg.C),
        gamma=float(cfg.gamma),
        delta=float(cfg.delta),
        mu=float(cfg.mu),
        zeta=float(cfg.zeta),
        eps=float(cfg.eps),
        N=N,
        k_max=float(k_max),
        Lambda=float(Lam),
        Y=float(Y),
        log_C=logC,
        E=E,
        log_lam=log_lam,
        lam=np.exp(log_lam),
        log_M=log_M,
        M=M,
        z=2.0 * M,
        t=t,
        hat_t_max=np.asarray(hat_t_max),
        y_regime=y_regime,
        final_regime=final_regime,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class FeasibilityReport:
    alpha: float
    slacks: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(v > 0.0 for v in self.slacks.values())

    def failing(self) -> list[str]:
        return [k for k, v in self.slacks.items() if not v > 0.0]


def feasibility_margins(sched: ParamSchedule | ScheduleConfig, alpha: float) -> FeasibilityReport:
    """Slack of each of the twelve regularity inequalities (positive = satisfied).

    The vanishing error functions of the regularity argument are replaced by
    the explicit margin terms of the per-term force bounds.  A bare
    ``ScheduleConfig`` is accepted because the feasible regime (gamma near 1)
    has scales far outside double range and cannot be planned.
    """
    crit = optimal_exponents()
    k = crit.k_max_star if sched.k_max is None else float(sched.k_max)
    L = crit.lambda_star if sched.Lambda is None else float(sched.Lambda)
    a = float(alpha)
    mu, de, ze, g1 = sched.mu, sched.delta, sched.zeta, 1.0 - sched.gamma
    m_dens = 6 * mu + 3 * de + 3 * g1
    m_vort = 4 * mu + 2 * de + 2 * g1
    hinge = a * (1 - k) - L > 0
    inf = math.inf
    # every entry is -(LHS) of an inequality LHS < 0
    slacks = {
        "1_density_time_derivative": -(a - k + 4 * ze + 7 * mu + 3 * de),
        "2_density_quadratic": -(a - min(k, (1 - a) * k + a * L, L - a * k) + 3 * de + 3 * mu),
        "3_density_transport_a": (1 - a) * (1 - k) - m_dens,
        "4_density_transport_b": (1 - k - L) - m_dens,
        "5_density_transport_c": -(a * (1 + k) + 2 * L + 3 * k - 1 + m_dens),
        "6_density_transport_d": -(a * (1 - k) + L + 3 * k - 1 + m_dens) if hinge else inf,
        "7_vorticity_time_factor": -(a * (1 + k) - L + 3 * mu + 2 * de),
        "8_vorticity_quadratic": -(a * (1 + k) - L + 2 * de + 5 * mu),
        "9_vorticity_old_transport": (1 - a) - (4 * mu + 2 * g1 + 2 * de),
        "10_vorticity_transport_a": -(a * (1 + k) - 1 + 2 * L + 3 * k + m_vort),
        "11_vorticity_transport_b": -(-1 + 2 * L + 3 * k + m_vort),
        "12_vorticity_transport_c": -(a * (1 - k) - 1 + L + 3 * k + m_vort) if hinge else inf,
    }
    return FeasibilityReport(a, slacks)
