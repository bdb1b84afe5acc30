"""Explicit stream function, velocity, vorticity and density fields.

Layer ``n`` in its own chart ``y = (a_n (x1 - c_n), b_n x2)``:

    psi~ = B g(y1) g(y2),   rho~ = -K g(y1) q(y2),
    g(y) = cutoff(lam y) sin y,   q(y) = cutoff(lam y) cos y,

with ``u = (d psi/d x2, -d psi/d x1)`` and ``omega = -Laplacian psi``.
Physical derivatives pick up factors ``a_n`` and ``b_n`` by the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .dynamics import LayerChainTrajectory, LayerState


def cutoff_eval(x):
    """Cutoff value and first two derivatives."""
    v = _accel.cutoff(np.asarray(x, dtype=np.float64))
    if v.ndim == 1:
        return {"value": float(v[0]), "d1": float(v[1]), "d2": float(v[2])}
    return {"value": v[0], "d1": v[1], "d2": v[2]}


def cutoff_derivative_maxima(samples: int = 20001) -> dict[str, float]:
    """Realized sup-norms of the cutoff and its first three derivatives."""
    x = np.linspace(0.0, 16.0 * np.pi, samples)
    v = _accel.cutoff(x)
    return {f"d{i}": float(np.max(np.abs(v[i]))) for i in range(4)}


@dataclass(frozen=True)
class Chart:
    n: int
    t: float
    center: tuple[float, float]
    a: float
    b: float

    @classmethod
    def of(cls, traj: LayerChainTrajectory, n: int, t: float) -> "Chart":
        st = traj.state(n, t)
        return cls(n, t, (st.center, 0.0), st.a, st.b)

    def forward(self, y):
        y = np.asarray(y, dtype=np.float64)
        return np.stack([self.center[0] + y[0] / self.a, self.center[1] + y[1] / self.b])

    def inverse(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([self.a * (x[0] - self.center[0]), self.b * (x[1] - self.center[1])])

    def inverse_jacobian(self) -> np.ndarray:
        return np.diag([self.a, self.b])


@dataclass
class FieldSample:
    """Field values at one or many points (arrays broadcast over the point shape)."""

    psi: np.ndarray
    u: np.ndarray  # (2, ...)
    omega: np.ndarray
    rho: np.ndarray
    grad_tilde_rho: np.ndarray  # (2, ...) derivatives in the layer chart (zero for sums)
    grad_rho: np.ndarray  # (2, ...)
    grad_omega: np.ndarray  # (2, ...)
    grad_u: np.ndarray  # (2, 2, ...): grad_u[i, j] = d u_i / d x_j

    @classmethod
    def zeros(cls, shape) -> "FieldSample":
        z = np.zeros(shape)
        return cls(z, np.zeros((2,) + shape), z.copy(), z.copy(), np.zeros((2,) + shape),
                   np.zeros((2,) + shape), np.zeros((2,) + shape), np.zeros((2, 2) + shape))

    def __add__(self, other: "FieldSample") -> "FieldSample":
        return FieldSample(*(getattr(self, f) + getattr(other, f) for f in _FIELDS))

    def is_zero(self) -> bool:
        return all(not np.any(getattr(self, f)) for f in _FIELDS)


_FIELDS = ("psi", "u", "omega", "rho", "grad_tilde_rho", "grad_rho", "grad_omega", "grad_u")


@dataclass(frozen=True)
class LayerProfiles:
    """Profile derivatives of one layer at the chart images of the points."""

    state: LayerState
    y1: np.ndarray
    y2: np.ndarray
    p1: np.ndarray  # (8, ...) profile rows in y1
    p2: np.ndarray  # (8, ...) profile rows in y2


def layer_profiles(traj: LayerChainTrajectory, n: int, t: float, x1, x2,
                   offset: np.ndarray | None = None) -> LayerProfiles | None:
    """Chart images and profile rows; ``offset`` optionally gives x1 - c_n directly."""
    st = traj.state(n, t)
    if not st.active:
        return None
    rel = (np.asarray(x1, dtype=np.float64) - st.center) if offset is None else offset
    y1 = st.a * rel
    y2 = st.b * np.asarray(x2, dtype=np.float64)
    y1, y2 = np.broadcast_arrays(y1, y2)
    return LayerProfiles(st, y1, y2, _accel.profile(y1, st.lam), _accel.profile(y2, st.lam))


def _from_profiles(pr: LayerProfiles) -> FieldSample:
    st = pr.state
    g1, dg1, ddg1, dddg1 = pr.p1[:4]
    g2, dg2, ddg2, dddg2, q2, dq2 = pr.p2[:6]
    a, b, B, K = st.a, st.b, st.B, st.K
    Ba2 = st.B_ab * a / b
    Bb2 = st.B_ab * b / a
    psi = B * g1 * g2
    u = np.stack([B * b * g1 * dg2, -B * a * dg1 * g2])
    omega = -(Ba2 * ddg1 * g2 + Bb2 * g1 * ddg2)
    grad_omega = np.stack([
        -a * (Ba2 * dddg1 * g2 + Bb2 * dg1 * ddg2),
        -b * (Ba2 * ddg1 * dg2 + Bb2 * g1 * dddg2),
    ])
    Bab = st.B_ab
    grad_u = np.stack([
        np.stack([Bab * dg1 * dg2, B * b * b * g1 * ddg2]),
        np.stack([-B * a * a * ddg1 * g2, -Bab * dg1 * dg2]),
    ])
    rho = -K * g1 * q2
    gt = np.stack([-K * dg1 * q2, -K * g1 * dq2])
    grad_rho = np.stack([a * gt[0], b * gt[1]])
    return FieldSample(psi, u, omega, rho, gt, grad_rho, grad_omega, grad_u)


def _split_points(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != 2:
        raise ValueError("points must have leading dimension 2")
    return x[0], x[1]


def layer_fields(traj: LayerChainTrajectory, n: int, t: float, x) -> FieldSample:
    """Fields of layer n alone; zero before t_n and outside the cutoff support."""
    x1, x2 = _split_points(x)
    shape = np.broadcast(x1, x2).shape
    pr = layer_profiles(traj, n, t, x1, x2)
    if pr is None:
        return FieldSample.zeros(shape)
    return _from_profiles(pr)


def total_fields(traj: LayerChainTrajectory, N: int, t: float, x) -> FieldSample:
    """Superposition of layers 1..N."""
    x1, x2 = _split_points(x)
    total = FieldSample.zeros(np.broadcast(x1, x2).shape)
    for n in range(1, N + 1):
        total = total + layer_fields(traj, n, t, x)
    # the sum lives in no single chart
    total.grad_tilde_rho = np.zeros_like(total.grad_tilde_rho)
    return total


def active_density_layers(traj: LayerChainTrajectory, t: float) -> list[int]:
    """Layers whose density amplitude is nonzero at t."""
    return [n for n in range(1, traj.N + 1) if traj.state(n, t).K != 0.0]


def support_box(traj: LayerChainTrajectory) -> tuple[float, float, float, float]:
    """(x1_lo, x1_hi, x2_lo, x2_hi) containing every layer's support at all times.

    Layer m reaches ``16 pi/(lam_m a_m(t)) <= 16 pi`` from its center because
    ``lam_m a_m(t) >= C^{(1 - k_max - Lambda) E_m} >= 1``.  Centers stay within
    ``L = sum_{j<N} 8 pi / min_t a_j(t)`` of c_1 with ``min_t a_j = C^{(1 - k_max) E_j}``.
    """
    sched = traj.sched
    L = sum(8.0 * np.pi * np.exp(-sched.log_scale(j, 1.0 - sched.k_max)) for j in range(1, traj.N))
    c = traj.center_one
    w = 16.0 * np.pi
    return (c - L - w, c + L + w, -w, w)


@dataclass(frozen=True)
class PastVelocity:
    U: np.ndarray  # (2, ...) physical velocity of layers m < n at the mapped points
    J_at_0: np.ndarray  # (2, 2): d U~_i / d y_j at the chart origin
    second_derivatives: np.ndarray  # (2, 3, ...): d^2 U~_i / (dy1dy1, dy1dy2, dy2dy2)


def velocity_of_past_layers(traj: LayerChainTrajectory, n: int, t: float, x_tilde) -> PastVelocity:
    """U~^(n-1)(t, y) = sum_{m<n} u^(m)(t, chart_n(y)) and its y-derivatives.

    Offsets to past centers are accumulated from layer offsets rather than by
    subtracting absolute centers.
    """
    y = np.asarray(x_tilde, dtype=np.float64)
    y1, y2 = np.broadcast_arrays(y[0], y[1])
    shape = y1.shape
    U = np.zeros((2,) + shape)
    J = np.zeros((2, 2))
    H = np.zeros((2, 3) + shape)
    if n <= 1:
        return PastVelocity(U, J, H)
    st_n = traj.state(n, t)
    if not st_n.active:
        raise ValueError(f"layer {n} is not active at t = {t}")
    an, bn = st_n.a, st_n.b
    X2 = y2 / bn
    for m in range(1, n):
        base = traj.offset(n, m, t)
        for pts, origin in ((y1, False), (np.zeros(1), True)):
            rel = base + pts / an
            x2 = np.zeros(1) if origin else X2
            pr = layer_profiles(traj, m, t, None, x2, offset=rel)
            st = pr.state
            a, b, B, Bab = st.a, st.b, st.B, st.B_ab
            g1, dg1, ddg1, dddg1 = pr.p1[0], pr.p1[1], pr.p1[2], pr.p1[3]
            g2, dg2, ddg2, dddg2 = pr.p2[0], pr.p2[1], pr.p2[2], pr.p2[3]
            if origin:
                # physical gradient at the center, then scaled to chart derivatives
                J += np.array([
                    [Bab * dg1[0] * dg2[0] / an, B * b * b * g1[0] * ddg2[0] / bn],
                    [-B * a * a * ddg1[0] * g2[0] / an, -Bab * dg1[0] * dg2[0] / bn],
                ])
                continue
            U[0] += B * b * g1 * dg2
            U[1] += -B * a * dg1 * g2
            Bb, Ba = B * b, B * a
            H[0, 0] += Bb * a * a * ddg1 * dg2 / (an * an)
            H[0, 1] += Bb * a * b * dg1 * ddg2 / (an * bn)
            H[0, 2] += Bb * b * b * g1 * dddg2 / (bn * bn)
            H[1, 0] += -Ba * a * a * dddg1 * g2 / (an * an)
            H[1, 1] += -Ba * a * b * ddg1 * dg2 / (an * bn)
            H[1, 2] += -Ba * b * b * dg1 * ddg2 / (bn * bn)
    return PastVelocity(U, J, H)


def past_velocity_at_origin(traj: LayerChainTrajectory, n: int, t: float) -> np.ndarray:
    return velocity_of_past_layers(traj, n, t, np.zeros(2)).U
