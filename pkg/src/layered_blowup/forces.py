"""Layer forces split into named terms, and a finite-difference residual oracle.

For layer n with background velocity ``U = sum_{m<n} u^(m)`` the forced
Boussinesq equations hold with

    f_rho^(n)   = d_t rho~ + W . grad rho^(n) + u^(n) . grad P^(n-1) + u^(n) . grad rho^(n)
    f_omega^(n) = tau      + W . grad omega^(n) + u^(n) . grad Omega^(n-1) + u^(n) . grad omega^(n)

where ``d_t`` is taken at fixed chart coordinates and ``W`` is the remainder of
the first-order Taylor expansion of ``U`` about the layer center.  The chart
moves with ``U`` to first order, so the zeroth- and first-order parts of the
transport cancel against the chart motion and never appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .dynamics import LayerChainTrajectory
from .fields import (
    FieldSample,
    _from_profiles,
    layer_profiles,
    total_fields,
    velocity_of_past_layers,
)

_GAUSS16_X, _GAUSS16_W = np.polynomial.legendre.leggauss(16)


class ResidualStepError(RuntimeError):
    """Richardson extrapolation of the time derivative did not settle."""


DENSITY_TERMS = ("time_derivative", "transport", "old_transport", "quadratic")
VORTICITY_TERMS = ("time_factor", "transport", "old_transport", "quadratic")


@dataclass
class ForceHalf:
    kind: str  # "density" or "vorticity"
    n: int
    t: float
    x: np.ndarray
    terms: dict[str, np.ndarray]
    total: np.ndarray


@dataclass
class ForceBreakdown:
    n: int
    t: float
    x: np.ndarray
    density: ForceHalf
    vorticity: ForceHalf

    @property
    def f_rho(self):
        return self.density.total

    @property
    def f_omega(self):
        return self.vorticity.total


def _close(kind, n, t, x, names, parts) -> ForceHalf:
    terms = dict(zip(names, parts))
    total = parts[0] + parts[1] + parts[2] + parts[3]
    return ForceHalf(kind, n, t, x, terms, total)


def _chart_points(traj, n, t, x):
    """Chart-n coordinates of physical points."""
    x = np.asarray(x, dtype=np.float64)
    st = traj.state(n, t)
    return np.stack(np.broadcast_arrays(st.a * (x[0] - st.center), st.b * x[1])), st


def _past_fields(traj, n, t, y) -> FieldSample:
    """Sum of layers m < n at chart-n points y, with offsets taken layer by layer."""
    st_n = traj.state(n, t)
    shape = np.shape(y[0])
    total = FieldSample.zeros(shape)
    for m in range(1, n):
        rel = traj.offset(n, m, t) + y[0] / st_n.a
        pr = layer_profiles(traj, m, t, None, y[1] / st_n.b, offset=rel)
        if pr is not None:
            total = total + _from_profiles(pr)
    return total


def taylor_remainder(traj: LayerChainTrajectory, n: int, t: float, x_tilde) -> np.ndarray:
    """W(y) = U~(y) - U~(0) - J(0) y by direct subtraction (physical velocity units)."""
    y = np.asarray(x_tilde, dtype=np.float64)
    if n <= 1:
        return np.zeros((2,) + np.broadcast(y[0], y[1]).shape)
    pv = velocity_of_past_layers(traj, n, t, y)
    U0 = velocity_of_past_layers(traj, n, t, np.zeros(2)).U
    J = pv.J_at_0
    W = np.empty_like(pv.U)
    W[0] = pv.U[0] - U0[0] - (J[0, 0] * y[0] + J[0, 1] * y[1])
    W[1] = pv.U[1] - U0[1] - (J[1, 0] * y[0] + J[1, 1] * y[1])
    return W


def taylor_remainder_quadrature(traj: LayerChainTrajectory, n: int, t: float, x_tilde,
                                nodes: int = 16) -> np.ndarray:
    """Integral form: W(y) = int_0^1 (1 - s) y^T Hess U~(s y) y ds, Gauss-Legendre."""
    y = np.asarray(x_tilde, dtype=np.float64)
    y1, y2 = np.broadcast_arrays(y[0], y[1])
    if n <= 1:
        return np.zeros((2,) + y1.shape)
    gx, gw = (_GAUSS16_X, _GAUSS16_W) if nodes == 16 else np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (gx + 1.0)
    w = 0.5 * gw
    W = np.zeros((2,) + y1.shape)
    for sk, wk in zip(s, w):
        H = velocity_of_past_layers(traj, n, t, np.stack([sk * y1, sk * y2])).second_derivatives
        quad = H[:, 0] * y1 * y1 + 2.0 * H[:, 1] * y1 * y2 + H[:, 2] * y2 * y2
        W += wk * (1.0 - sk) * quad
    return W


def _layer_parts(traj, n, t, x):
    """Shared pieces for both halves at physical points x."""
    y, st = _chart_points(traj, n, t, x)
    pr = layer_profiles(traj, n, t, None, x[1], offset=np.asarray(x[0], dtype=np.float64) - st.center)
    own = _from_profiles(pr)
    past = _past_fields(traj, n, t, y)
    W = taylor_remainder(traj, n, t, y)
    return y, st, pr, own, past, W


def _dot(v, w):
    return v[0] * w[0] + v[1] * w[1]


def _density_half(traj, n, t, x, parts) -> ForceHalf:
    y, st, pr, own, past, W = parts
    g1, q2 = pr.p1[0], pr.p2[4]
    time_derivative = -st.K_dot * g1 * q2
    transport = _dot(W, own.grad_rho)
    old_transport = _dot(own.u, past.grad_rho)
    quadratic = _dot(own.u, own.grad_rho)
    return _close("density", n, t, x, DENSITY_TERMS, [time_derivative, transport, old_transport, quadratic])


def time_factor(traj: LayerChainTrajectory, n: int, t: float, y) -> np.ndarray:
    """d_t omega~ - d_x2 rho^(n) with the order-one terms cancelled by hand.

    Only terms carrying a cutoff derivative (hence a factor lam_n) remain.
    """
    st = traj.state(n, t)
    lam = st.lam
    c1 = _accel.cutoff(lam * np.asarray(y[0], dtype=np.float64))
    c2 = _accel.cutoff(lam * np.asarray(y[1], dtype=np.float64))
    s1, co1 = np.sin(y[0]), np.cos(y[0])
    s2, co2 = np.sin(y[1]), np.cos(y[1])
    edge1 = lam * lam * c1[2] * s1 + 2.0 * lam * c1[1] * co1
    edge2 = lam * lam * c2[2] * s2 + 2.0 * lam * c2[1] * co2
    return (
        -st.dB_a2 * edge1 * c2[0] * s2
        - st.dB_b2 * c1[0] * s1 * edge2
        + lam * st.D * c1[0] * s1 * c2[1] * co2
    )


def _vorticity_half(traj, n, t, x, parts) -> ForceHalf:
    y, st, pr, own, past, W = parts
    tau = time_factor(traj, n, t, y)
    transport = _dot(W, own.grad_omega)
    old_transport = _dot(own.u, past.grad_omega)
    quadratic = _dot(own.u, own.grad_omega)
    return _close("vorticity", n, t, x, VORTICITY_TERMS, [tau, transport, old_transport, quadratic])


def _zero_half(kind, names, n, t, x):
    x = np.asarray(x, dtype=np.float64)
    z = np.zeros(np.broadcast(x[0], x[1]).shape)
    return _close(kind, n, t, x, names, [z, z.copy(), z.copy(), z.copy()])


def density_force(traj: LayerChainTrajectory, n: int, t: float, x) -> ForceHalf:
    if not traj.state(n, t).active:
        return _zero_half("density", DENSITY_TERMS, n, t, x)
    return _density_half(traj, n, t, x, _layer_parts(traj, n, t, np.asarray(x, dtype=np.float64)))


def vorticity_force(traj: LayerChainTrajectory, n: int, t: float, x) -> ForceHalf:
    if not traj.state(n, t).active:
        return _zero_half("vorticity", VORTICITY_TERMS, n, t, x)
    return _vorticity_half(traj, n, t, x, _layer_parts(traj, n, t, np.asarray(x, dtype=np.float64)))


def force_breakdown(traj: LayerChainTrajectory, n: int, t: float, x) -> ForceBreakdown:
    x = np.asarray(x, dtype=np.float64)
    if not traj.state(n, t).active:
        return ForceBreakdown(n, t, x, _zero_half("density", DENSITY_TERMS, n, t, x),
                              _zero_half("vorticity", VORTICITY_TERMS, n, t, x))
    parts = _layer_parts(traj, n, t, x)
    return ForceBreakdown(n, t, x, _density_half(traj, n, t, x, parts), _vorticity_half(traj, n, t, x, parts))


def total_forces(traj: LayerChainTrajectory, N: int, t: float, x) -> tuple[np.ndarray, np.ndarray]:
    """(sum_n f_rho^(n), sum_n f_omega^(n))."""
    f_rho = 0.0
    f_omega = 0.0
    for n in range(1, N + 1):
        fb = force_breakdown(traj, n, t, x)
        f_rho = f_rho + fb.f_rho
        f_omega = f_omega + fb.f_omega
    return f_rho, f_omega


@dataclass
class Residual:
    res_omega: np.ndarray
    res_rho: np.ndarray
    f_omega: np.ndarray
    f_rho: np.ndarray
    scale_omega: np.ndarray  # sum of magnitudes of the residual's terms
    scale_rho: np.ndarray
    step: float
    fd_error_omega: np.ndarray
    fd_error_rho: np.ndarray
    meta: dict = field(default_factory=dict)

    def relative_errors(self, floor_rel: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
        """|res - f| / (|res| + |f| + floor), floor scaled to the local term sizes."""
        out = []
        for res, f, scale in ((self.res_omega, self.f_omega, self.scale_omega),
                              (self.res_rho, self.f_rho, self.scale_rho)):
            floor = floor_rel * scale + 1e-300
            out.append(np.abs(res - f) / (np.abs(res) + np.abs(f) + floor))
        return out[0], out[1]


def default_time_step(traj: LayerChainTrajectory, t: float) -> float:
    """Starting step: 1e-4 times the window length of the newest layer active at t."""
    newest = max((n for n in range(1, traj.N + 1) if traj.sched.t[n] <= t), default=1)
    return 1e-4 * traj.sched.one_minus_t(newest)


def residual_oracle(traj: LayerChainTrajectory, N: int, t: float, x, h_t: float | None = None,
                    richardson_tol: float = 1e-5, halvings: int = 12) -> Residual:
    """Residual of the unforced equations for the superposed fields.

    ``res_omega = d_t Omega + U . grad Omega - d_x2 P`` and
    ``res_rho = d_t P + U . grad P``.  ``d_t`` comes from Richardson-extrapolated
    central differences; starting at ``h_t`` the step is halved ``halvings``
    times and each point keeps the step whose successive extrapolations agree
    best.  If even that disagreement exceeds ``richardson_tol`` times the local
    term scale, ResidualStepError is raised.
    """
    x = np.asarray(x, dtype=np.float64)
    h0 = default_time_step(traj, t) if h_t is None else float(h_t)
    h0 = min(h0, 0.5 * t, 0.5 * (1.0 - t))
    if not h0 > 0.0:
        raise ValueError("t must lie in (0, 1)")

    steps = [h0 / 2**k for k in range(halvings + 1)]
    central = []
    for h in steps:
        fp = total_fields(traj, N, t + h, x)
        fm = total_fields(traj, N, t - h, x)
        central.append(((fp.omega - fm.omega) / (2.0 * h), (fp.rho - fm.rho) / (2.0 * h)))

    def extrapolate(i):
        R = np.stack([(4.0 * central[k + 1][i] - central[k][i]) / 3.0 for k in range(halvings)])
        err = np.abs(np.diff(R, axis=0))  # err[k] compares R[k+1] with R[k]
        best = np.argmin(err, axis=0)
        pick = np.take_along_axis(R[1:], best[None], axis=0)[0]
        return pick, np.take_along_axis(err, best[None], axis=0)[0], best

    dt_omega, err_omega, k_omega = extrapolate(0)
    dt_rho, err_rho, k_rho = extrapolate(1)

    f = total_fields(traj, N, t, x)
    adv_omega = _dot(f.u, f.grad_omega)
    adv_rho = _dot(f.u, f.grad_rho)
    res_omega = dt_omega + adv_omega - f.grad_rho[1]
    res_rho = dt_rho + adv_rho
    speed = np.hypot(f.u[0], f.u[1])
    scale_omega = np.abs(dt_omega) + speed * np.hypot(*f.grad_omega) + np.abs(f.grad_rho[1])
    scale_rho = np.abs(dt_rho) + speed * np.hypot(*f.grad_rho)

    bad = (err_omega > richardson_tol * scale_omega + 1e-300) | (err_rho > richardson_tol * scale_rho + 1e-300)
    if np.any(bad):
        raise ResidualStepError(
            f"Richardson disagreement at {int(np.sum(bad))} point(s) for steps {steps[0]:.3g}..{steps[-1]:.3g}; "
            "the step is too small (cancellation) or too large (truncation)"
        )
    f_rho, f_omega = total_forces(traj, N, t, x)
    chosen = np.asarray(steps)[np.minimum(k_omega, k_rho) + 1]
    return Residual(res_omega, res_rho, np.asarray(f_omega), np.asarray(f_rho), scale_omega, scale_rho,
                    h0, err_omega, err_rho, {"t": t, "N": N, "steps": chosen})
