"""Layer-by-layer integration of the coupled center / aspect-ratio / amplitude ODEs.

Layer ``n`` lives on ``[t_n, 1]`` and is integrated in the rescaled time
``s = (t - t_n)/(1 - t_n)`` so that step sizes are O(1).  Three quantities are
carried per layer:

* ``angle``: ``a_{n-1}(1) (c_n - c_{n-1})``, the pendulum angle of the center
  offset (forward in time from its initial value),
* ``kappa``: ``ln b_n - E_n ln C = k_n E_n ln C`` (backward from ``kappa(1) = 0``),
* ``hbar``: ``int_{t_n}^t h_n(s) exp(kappa(s)) ds``, so that ``H_n = C^{E_n} hbar``.

Absolute magnitudes never appear: ``B a^2 = M r (1 - tanh 2 kappa)``,
``B b^2 = M r (1 + tanh 2 kappa)`` and ``B a b = M r sech 2 kappa`` with
``r = hbar(t)/hbar(1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import _accel
from .pendulum import IntegrationError
from .schedule import ParamSchedule

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_PANEL_X, _PANEL_W = np.polynomial.legendre.leggauss(8)


class DomainError(ValueError):
    """A trajectory was queried outside the interval on which it is defined."""


def transition(x):
    """Smooth step: 0 on (-inf, 0], 1 on [1, inf)."""
    out = _accel.transition(np.asarray(x, dtype=np.float64))[0]
    return float(out) if out.ndim == 0 else out


def transition_integral(y):
    """Integral of the smooth step from 0 to y (y >= 0)."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    inner = np.clip(y, 0.0, 1.0)
    nodes = 0.5 * (_GL_X[None, :] + 1.0) * inner[:, None]
    vals = _accel.transition(nodes.ravel())[0].reshape(nodes.shape)
    part = 0.5 * inner * (vals @ _GL_W)
    return part + np.maximum(y - 1.0, 0.0)


@dataclass(frozen=True)
class RampProfile:
    """Smooth trapezoid h_n: up on [t_n, t_n + L], flat, down on [t_{n+1} - L, t_{n+1}]."""

    n: int
    t_on: float
    t_off: float
    length: float
    width: float

    @classmethod
    def from_schedule(cls, sched: ParamSchedule, n: int) -> "RampProfile":
        L = (1.0 - float(sched.t[n])) * sched.zeta
        return cls(n, float(sched.t[n]), float(sched.t[n + 1]), L, sched.eps * L)

    @property
    def plateau_value(self) -> float:
        return 1.0 - self.width / self.length

    def _pulse_integral(self, s):
        # int_0^s theta(x/w) theta((L - x)/w) dx for s in [0, L]; the two factors never overlap
        L, w = self.length, self.width
        s = np.asarray(s, dtype=np.float64)
        first = w * transition_integral(s / w)
        second = w * (transition_integral(L / w) - transition_integral(np.maximum(L - s, 0.0) / w)) - 0.5 * w
        return np.where(s <= L - w, first, second)

    def h(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        L = self.length
        out = np.zeros_like(t)
        up = (t > self.t_on) & (t < self.t_on + L)
        flat = (t >= self.t_on + L) & (t <= self.t_off - L)
        down = (t > self.t_off - L) & (t < self.t_off)
        out[up] = self._pulse_integral(t[up] - self.t_on) / L
        out[flat] = self.plateau_value
        # symmetric pulse: the down ramp mirrors the up ramp about t_off
        out[down] = self._pulse_integral(self.t_off - t[down]) / L
        return out

    def dh_dt(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        L, w = self.length, self.width
        out = np.zeros_like(t)
        up = (t > self.t_on) & (t < self.t_on + L)
        down = (t > self.t_off - L) & (t < self.t_off)
        su = t[up] - self.t_on
        out[up] = transition(su / w) * transition((L - su) / w) / L
        sd = t[down] - (self.t_off - L)
        out[down] = -transition(sd / w) * transition((L - sd) / w) / L
        return out


def ramp(profile: RampProfile, t):
    """{h, dh_dt} at time(s) t."""
    h = profile.h(t)
    d = profile.dh_dt(t)
    if np.ndim(t) == 0:
        return {"h": float(h[0]), "dh_dt": float(d[0])}
    return {"h": h, "dh_dt": d}


@dataclass
class LayerSolution:
    n: int
    t0: float
    span: float
    log_scale: float  # E_n ln C
    M: float
    ramp: RampProfile
    angle0: float
    angle_spline: CubicHermiteSpline | None
    kappa_spline: CubicHermiteSpline | None
    hbar_spline: CubicHermiteSpline
    hbar_total: float
    mesh: np.ndarray
    kappa_shift: float = 0.0  # fault injection only

    def s_of(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < self.t0 - 1e-15) or np.any(t > 1.0 + 1e-15):
            raise DomainError(f"layer {self.n} is defined on [{self.t0}, 1]; queried at {t}")
        return np.clip((t - self.t0) / self.span, 0.0, 1.0)

    def angle(self, t, nu: int = 0):
        if self.angle_spline is None:
            return self.angle0 if nu == 0 else 0.0
        return self.angle_spline(self.s_of(t), nu) / self.span**nu

    def kappa(self, t, nu: int = 0):
        if self.kappa_spline is None:
            return (self.kappa_shift if nu == 0 else 0.0) + 0.0 * np.asarray(t, dtype=np.float64)
        base = self.kappa_spline(self.s_of(t), nu) / self.span**nu
        return base + (self.kappa_shift if nu == 0 else 0.0)

    def ratio(self, t):
        return self.hbar_spline(self.s_of(t)) / self.hbar_total


@dataclass(frozen=True)
class LayerState:
    """Scalars describing one layer at one instant."""

    n: int
    active: bool
    center: float  # absolute center, x1
    center_rel: float  # c_n - c_1, accurate at small scales
    angle: float
    kappa: float
    log_a: float
    log_b: float
    a: float
    b: float
    B: float
    B_ab: float
    ratio: float
    h: float
    dh: float
    K: float  # density amplitude: rho~ = -K cutoff^2 sin x1 cos x2
    K_dot: float
    D: float  # d/dt [B (a^2 + b^2)]
    dB_a2: float
    dB_b2: float
    dB: float
    kappa_rate: float  # d ln b / dt from the ODE right-hand side
    center_rate: float  # d c / dt from the ODE right-hand side
    lam: float


class LayerChainTrajectory:
    """Integrated layer chain, queryable at any t in [0, 1]."""

    def __init__(self, sched: ParamSchedule, layers: list[LayerSolution], tol: float):
        self.sched = sched
        self.layers = {sol.n: sol for sol in layers}
        self.N = len(layers)
        self.tol = tol
        self.center_one = layers[0].angle0 / math.exp(sched.log_C)  # a_0(1) = C

    # --- per-layer primitive accessors --------------------------------------

    def _past(self, m: int, t: float):
        """(B_m b_m, B_m a_m b_m, a_m) for a past layer at time t."""
        sol = self.layers[m]
        r = float(sol.ratio(t))
        kap = float(sol.kappa(t))
        sech = 1.0 / math.cosh(2.0 * kap)
        B_ab = sol.M * r * sech
        a = math.exp(sol.log_scale - kap)
        return B_ab / a, B_ab, a

    def offset(self, n: int, m: int, t: float, angle_n: float | None = None) -> float:
        """c_n(t) - c_m(t) as a sum of layer offsets (m < n)."""
        total = 0.0
        for j in range(m + 1, n + 1):
            ang = angle_n if (j == n and angle_n is not None) else float(self.layers[j].angle(t))
            total += ang / math.exp(self.layers[j - 1].log_scale)
        return total

    def center_rhs(self, n: int, t: float, angle_n: float) -> float:
        """d/dt of the layer-n center given its offset angle (sum over past layers)."""
        tot = 0.0
        for m in range(1, n):
            Bb, _, a = self._past(m, t)
            tot += Bb * math.sin(a * self.offset(n, m, t, angle_n))
        return tot

    def angle_rhs(self, n: int, t: float, angle_n: float) -> float:
        """d/dt of a_{n-1}(1)(c_n - c_{n-1}); differences of sines taken exactly."""
        A = math.exp(self.layers[n - 1].log_scale)
        Bb, _, a = self._past(n - 1, t)
        tot = Bb * math.sin(a * angle_n / A)
        for m in range(1, n - 1):
            Bb, _, a = self._past(m, t)
            d = a * self.offset(n - 1, m, t)
            e = a * angle_n / A
            tot += Bb * 2.0 * math.cos(d + 0.5 * e) * math.sin(0.5 * e)
        return A * tot

    def kappa_rhs(self, n: int, t: float, angle_n: float | None = None) -> float:
        """d ln b_n / dt = sum over past layers of B_m a_m b_m cos(a_m (c_n - c_m))."""
        tot = 0.0
        for m in range(1, n):
            _, B_ab, a = self._past(m, t)
            tot += B_ab * math.cos(a * self.offset(n, m, t, angle_n))
        return tot

    # --- public accessors -----------------------------------------------------

    def _check_t(self, t: float) -> None:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"time {t} outside [0, 1]")

    def center(self, n: int, t: float) -> float:
        return self.center_one + self.offset(n, 1, t)

    def k(self, n: int, t):
        sol = self.layers[n]
        return sol.kappa(t) / sol.log_scale

    def log_b(self, n: int, t):
        sol = self.layers[n]
        return sol.log_scale + sol.kappa(t)

    def log_a(self, n: int, t):
        sol = self.layers[n]
        return sol.log_scale - sol.kappa(t)

    def xi(self, n: int, t):
        """Xi_n = c_n - c_{n-1}; for n = 1 the reference center is 0."""
        sol = self.layers[n]
        return sol.angle(t) / math.exp(self.sched.log_scale(n - 1))

    def B_times_a2b2(self, n: int, t):
        sol = self.layers[n]
        return 2.0 * sol.M * sol.ratio(t)

    def B(self, n: int, t):
        sol = self.layers[n]
        kap = sol.kappa(t)
        return sol.M * sol.ratio(t) * np.exp(-2.0 * sol.log_scale) / np.cosh(2.0 * kap)

    def state(self, n: int, t: float) -> LayerState:
        self._check_t(t)
        sched = self.sched
        lam = float(sched.lam[n])
        if n > self.N:
            raise DomainError(f"layer {n} not integrated (N = {self.N})")
        sol = self.layers[n]
        if t < sol.t0:
            zero = 0.0
            a = math.exp(sol.log_scale)
            return LayerState(n, False, math.nan, math.nan, math.nan, 0.0, sol.log_scale, sol.log_scale,
                              a, a, zero, zero, zero, zero, zero, zero, zero, zero, zero, zero, zero,
                              zero, zero, lam)
        ang = float(sol.angle(t))
        kap = float(sol.kappa(t))
        ratio = float(sol.ratio(t))
        h = float(sol.ramp.h(t)[0])
        dh = float(sol.ramp.dh_dt(t)[0])
        log_a = sol.log_scale - kap
        log_b = sol.log_scale + kap
        th = math.tanh(2.0 * kap)
        sech = 1.0 / math.cosh(2.0 * kap)
        kr = self.kappa_rhs(n, t, ang) if n > 1 else 0.0
        ratio_dot = h * math.exp(kap) / sol.hbar_total
        M = sol.M
        dBa2 = M * (ratio_dot * (1.0 - th) - ratio * 2.0 * kr * sech * sech)
        dBb2 = M * (ratio_dot * (1.0 + th) + ratio * 2.0 * kr * sech * sech)
        scale2 = math.exp(-2.0 * sol.log_scale)
        dB = M * scale2 * (ratio_dot * sech - ratio * 2.0 * kr * th * sech)
        # K = z h / H(1) with H(1) = C^{E_n} hbar(1)
        K = 2.0 * M * h / (math.exp(sol.log_scale) * sol.hbar_total)
        K_dot = 2.0 * M * dh / (math.exp(sol.log_scale) * sol.hbar_total)
        return LayerState(
            n=n,
            active=True,
            center=self.center_one + self.offset(n, 1, t),
            center_rel=self.offset(n, 1, t),
            angle=ang,
            kappa=kap,
            log_a=log_a,
            log_b=log_b,
            a=math.exp(log_a),
            b=math.exp(log_b),
            B=M * ratio * scale2 * sech,
            B_ab=M * ratio * sech,
            ratio=ratio,
            h=h,
            dh=dh,
            K=K,
            K_dot=K_dot,
            D=2.0 * M * ratio_dot,
            dB_a2=dBa2,
            dB_b2=dBb2,
            dB=dB,
            kappa_rate=kr,
            center_rate=self.center_rhs(n, t, ang) if n > 1 else 0.0,
            lam=lam,
        )

    def states(self, t: float) -> list[LayerState]:
        return [self.state(n, t) for n in range(1, self.N + 1)]

    def with_k_offset(self, n: int, dk: float) -> "LayerChainTrajectory":
        """Copy with k_n shifted by dk everywhere (fault injection for the verifier)."""
        layers = []
        for m in range(1, self.N + 1):
            sol = self.layers[m]
            if m == n:
                sol = replace(sol, kappa_shift=sol.kappa_shift + dk * sol.log_scale)
            layers.append(sol)
        return LayerChainTrajectory(self.sched, layers, self.tol)


def amplitude_time_derivatives(traj: LayerChainTrajectory, n: int, t: float) -> dict[str, float]:
    """d/dt of B(a^2 + b^2), B a^2 and B b^2 for layer n."""
    st = traj.state(n, t)
    return {"d_Bn_sum": st.D, "d_Bn_a2": st.dB_a2, "d_Bn_b2": st.dB_b2}


def _layer_mesh(sched: ParamSchedule, n: int, n_base: int, n_ramp: int) -> np.ndarray:
    """Rescaled-time nodes: uniform base plus dense nodes on both ramps."""
    frac = sched.window_fraction(n)
    z = sched.zeta
    parts = [np.linspace(0.0, 1.0, n_base + 1)]
    parts.append(np.linspace(0.0, z, n_ramp + 1))
    parts.append(np.linspace(frac - z, frac, n_ramp + 1))
    mesh = np.unique(np.concatenate(parts))
    return mesh[(mesh >= 0.0) & (mesh <= 1.0)]


def _cumulative_panels(mesh: np.ndarray, integrand) -> np.ndarray:
    """Cumulative composite 8-point Gauss integral of ``integrand`` over ``mesh``."""
    lo, hi = mesh[:-1], mesh[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + hi[:, None]) * 0.5 + half[:, None] * _PANEL_X[None, :]
    vals = integrand(nodes.ravel()).reshape(nodes.shape)
    panel = half * (vals @ _PANEL_W)
    return np.concatenate([[0.0], np.cumsum(panel)])


def _solve(rhs, s_span, y0, tol, mesh, what):
    sol = solve_ivp(
        lambda s, y: [rhs(s, y[0])],
        s_span,
        [y0],
        method="DOP853",
        rtol=tol,
        atol=tol * max(1.0, abs(y0)) * 1e-2,
        dense_output=True,
        max_step=0.02,
    )
    if not sol.success:
        raise IntegrationError(f"{what}: {sol.message}")
    return sol.sol(mesh)[0]


def integrate_chain(
    sched: ParamSchedule,
    N: int | None = None,
    tol: float = 1e-11,
    n_base: int = 4096,
    n_ramp: int = 2000,
) -> LayerChainTrajectory:
    """Integrate layers 1..N in order; layer n only depends on layers m < n."""
    N = sched.N if N is None else int(N)
    if not 1 <= N <= sched.N:
        raise ValueError(f"N must lie in [1, {sched.N}]")
    built: list[LayerSolution] = []
    for n in range(1, N + 1):
        t0 = float(sched.t[n])
        span = 1.0 - t0
        mesh = _layer_mesh(sched, n, n_base, n_ramp)
        ramp_n = RampProfile.from_schedule(sched, n)
        angle0 = 2.0 * math.atan(math.exp(-float(sched.hat_t_max[n])))
        partial = LayerChainTrajectory(sched, built, tol) if built else None
        t_of = lambda s: t0 + span * s  # noqa: E731

        if n == 1:
            angle_spline = None
            kappa_spline = None
            kappa_nodes = np.zeros_like(mesh)
        else:
            f_angle = lambda s, y: span * partial.angle_rhs(n, t_of(s), y)  # noqa: E731
            ang_nodes = _solve(f_angle, (0.0, 1.0), angle0, tol, mesh, f"layer {n} center")
            d_ang = np.array([f_angle(s, y) for s, y in zip(mesh, ang_nodes)])
            angle_spline = CubicHermiteSpline(mesh, ang_nodes, d_ang)

            def angle_at(s, _spl=angle_spline):
                return float(_spl(s))

            f_kappa = lambda s, y: span * partial.kappa_rhs(n, t_of(s), angle_at(s))  # noqa: E731
            kap_nodes = _solve(f_kappa, (1.0, 0.0), 0.0, tol, mesh, f"layer {n} aspect ratio")
            kap_nodes[-1] = 0.0
            d_kap = np.array([f_kappa(s, y) for s, y in zip(mesh, kap_nodes)])
            kappa_spline = CubicHermiteSpline(mesh, kap_nodes, d_kap)
            kappa_nodes = kap_nodes

        kspl = kappa_spline

        def integrand(s, _k=kspl):
            kap = 0.0 if _k is None else _k(s)
            return span * ramp_n.h(t_of(s)) * np.exp(kap)

        hbar_nodes = _cumulative_panels(mesh, integrand)
        d_hbar = span * ramp_n.h(t_of(mesh)) * np.exp(kappa_nodes)
        hbar_spline = CubicHermiteSpline(mesh, hbar_nodes, d_hbar)
        built.append(
            LayerSolution(
                n=n,
                t0=t0,
                span=span,
                log_scale=sched.log_scale(n),
                M=float(sched.M[n]),
                ramp=ramp_n,
                angle0=angle0,
                angle_spline=angle_spline,
                kappa_spline=kappa_spline,
                hbar_spline=hbar_spline,
                hbar_total=float(hbar_nodes[-1]),
                mesh=mesh,
            )
        )
    return LayerChainTrajectory(sched, built, tol)
