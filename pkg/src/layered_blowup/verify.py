"""Invariant suite, ideal-model convergence probe, regularity sweep and blow-up tracker."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import _accel
from .dynamics import LayerChainTrajectory, RampProfile, amplitude_time_derivatives, integrate_chain
from .fields import (
    active_density_layers,
    layer_fields,
    support_box,
    total_fields,
    velocity_of_past_layers,
)
from .forces import force_breakdown, residual_oracle, taylor_remainder, taylor_remainder_quadrature
from .norms import HolderStrategy, holder_estimate
from .pendulum import IdealLayerModel, ideal_k
from .schedule import ScheduleConfig, optimal_exponents, plan


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    relation: str = "<="
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: measured={self.measured:.6g} {self.relation} {self.tolerance:.6g}{extra}"


@dataclass
class SuiteReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _le(name, measured, tol, detail=""):
    measured = float(measured)
    return CheckResult(name, bool(measured <= tol), measured, float(tol), "<=", detail)


def _ge(name, measured, tol, detail=""):
    measured = float(measured)
    return CheckResult(name, bool(measured >= tol), measured, float(tol), ">=", detail)


def layer_times(traj: LayerChainTrajectory, n: int, count: int = 201) -> np.ndarray:
    """Times in [t_n, 1]: a uniform grid plus the ramp breakpoints."""
    sched = traj.sched
    t0 = float(sched.t[n])
    ramp = RampProfile.from_schedule(sched, n)
    extra = [ramp.t_on + ramp.length, ramp.t_off - ramp.length, ramp.t_off,
             ramp.t_on + 0.5 * ramp.length, ramp.t_off - 0.5 * ramp.length]
    return np.unique(np.concatenate([np.linspace(t0, 1.0, count), extra]))


def _chart_box_points(traj, n, t, rng, count, reach=15.0):
    """Random physical points whose layer-n chart images fill |y_i| <= reach pi / lam_n."""
    st = traj.state(n, t)
    y = rng.uniform(-reach * np.pi / st.lam, reach * np.pi / st.lam, (2, count))
    return np.stack([st.center + y[0] / st.a, y[1] / st.b]), y


# ------------------------------------------------------------------ dynamics


def _dynamics_checks(traj: LayerChainTrajectory, N: int) -> list[CheckResult]:
    sched = traj.sched
    out = []
    ab = kend = amp = 0.0
    for n in range(1, N + 1):
        for t in layer_times(traj, n):
            st = traj.state(n, t)
            ab = max(ab, abs(st.log_a + st.log_b - 2.0 * sched.log_scale(n)))
        kend = max(kend, abs(float(traj.k(n, 1.0))))
        st = traj.state(n, 1.0)
        amp = max(amp, abs(st.B * (st.a**2 + st.b**2) / (2.0 * sched.M[n]) - 1.0))
    out.append(_le("ab_conservation", ab, 1e-9, "max |ln a + ln b - 2 E ln C|"))
    out.append(_le("k_terminal_zero", kend, 1e-9, "max |k_n(1)|"))
    out.append(_le("amplitude_terminal", amp, 1e-10, "max |B(1)(a^2+b^2)/(2M) - 1|"))
    out.append(_le("z_over_M", float(np.max(np.abs(sched.z[1:] / sched.M[1:] - 2.0))), 0.0))

    before = 0.0
    for n in range(1, N + 1):
        t0 = float(sched.t[n])
        for t in np.linspace(0.0, t0, 17):
            before = max(before, abs(traj.state(n, t).B))
    out.append(_le("amplitude_zero_before_start", before, 0.0))

    ramp_err = 0.0
    for n in range(1, N + 1):
        r = RampProfile.from_schedule(sched, n)
        t_off = np.concatenate([np.linspace(0.0, r.t_on, 20), np.linspace(r.t_off, 1.0, 20)])
        ramp_err = max(ramp_err, float(np.max(np.abs(r.h(t_off)))))
        plateau = np.linspace(r.t_on + r.length, r.t_off - r.length, 50)
        hp = r.h(plateau)
        ramp_err = max(ramp_err, float(np.max(np.abs(r.dh_dt(plateau)))),
                       float(np.max(np.maximum(1.0 - 2.0 * sched.eps - hp, 0.0))),
                       float(np.max(np.maximum(hp - 1.0, 0.0))))
    out.append(_le("ramp_shape", ramp_err, 0.0, "h = 0 off-window, h in [1-2eps, 1] and h' = 0 on plateau"))

    split = fd = 0.0
    for n in range(1, N + 1):
        ts = layer_times(traj, n, 41)[1:-1]
        scale = max(abs(traj.state(n, t).D) for t in ts) or 1.0
        for t in ts:
            d = amplitude_time_derivatives(traj, n, t)
            split = max(split, abs(d["d_Bn_sum"] - d["d_Bn_a2"] - d["d_Bn_b2"])
                        / (abs(d["d_Bn_a2"]) + abs(d["d_Bn_b2"]) + 1e-300))
            h = 1e-6 * sched.one_minus_t(n)
            if t - h < sched.t[n] or t + h > 1.0:
                continue

            def amp_of(s):
                st = traj.state(n, s)
                return st.B * (st.a**2 + st.b**2)

            fd = max(fd, abs((amp_of(t + h) - amp_of(t - h)) / (2 * h) - d["d_Bn_sum"]) / scale)
    out.append(_le("amplitude_derivative_split", split, 1e-12, "sum vs a^2 + b^2 pieces"))
    out.append(_le("amplitude_derivative_fd", fd, 1e-6, "central difference of B(a^2+b^2)"))

    freeze = 0.0
    worst = ""
    for m in range(1, N):
        tol = math.exp(-0.5 * sched.delta * sched.gamma * sched.log_scale(m))
        end = traj.state(m, 1.0)
        for t in np.linspace(float(sched.t[m + 1]), 1.0, 101):
            st = traj.state(m, t)
            dev = max(abs(st.b / end.b - 1.0), abs(st.a / end.a - 1.0), abs(st.B / end.B - 1.0))
            if dev / tol > freeze:
                freeze, worst = dev / tol, f"layer {m}"
    out.append(_le("freezing_after_switch_off", freeze, 1.0,
                   ("deviation / C^(-delta gamma E_m / 2) " + worst).strip()))

    conf = 0.0
    trap_lo, trap_hi = math.inf, -math.inf
    for n in range(2, N + 1):
        for t in layer_times(traj, n):
            for m in range(1, n):
                st_m = traj.state(m, t)
                conf = max(conf, abs(traj.offset(n, m, t)) * st_m.a / (8.0 * math.pi))
            ang = float(traj.layers[n].angle(t))
            trap_lo, trap_hi = min(trap_lo, ang), max(trap_hi, ang)
    out.append(_le("center_confinement", conf, 1.0, "max |c_n - c_m| a_m / (8 pi)"))
    if N >= 2:
        margin = min(trap_lo, 1.5 * math.pi - trap_hi)
        out.append(_ge("trap_region", margin, 0.0 + 1e-300, "distance of a_(n-1)(1) Xi to the ends of (0, 3 pi / 2)"))
    else:
        out.append(_ge("trap_region", math.inf, 0.0, "vacuous for N = 1"))

    c1 = math.asin(math.exp(-sched.log_scale(1, sched.k_max))) / sched.C
    drift = max(abs(traj.center(1, t) - c1) for t in np.linspace(0.0, 1.0, 11))
    out.append(_le("layer1_center_fixed", drift / c1, 1e-12, "relative to arcsin(C^(-k_max E_1))/C"))
    return out


# -------------------------------------------------------------------- fields


def _fd4(f, x, h, axis):
    e = np.zeros_like(x)
    e[axis] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def _fd4_second(f, x, h, axis):
    e = np.zeros_like(x)
    e[axis] = h
    return (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) / (12 * h * h)


def _field_checks(traj, N, rng, n_points, n_times) -> list[CheckResult]:
    out = []
    div = rel_u = rel_w = 0.0
    for n in range(1, N + 1):
        t0 = float(traj.sched.t[n])
        for t in t0 + (1.0 - t0) * np.linspace(0.05, 0.95, 3):
            x, _ = _chart_box_points(traj, n, t, rng, n_points, reach=12.0)
            st = traj.state(n, t)
            hx, hy = 1e-3 / st.a, 1e-3 / st.b
            lf = layer_fields(traj, n, t, x)

            def comp(name, idx=None):
                def g(p):
                    v = getattr(layer_fields(traj, n, t, p), name)
                    return v if idx is None else v[idx]
                return g

            du1 = _fd4(comp("u", 0), x, hx, 0)
            du2 = _fd4(comp("u", 1), x, hy, 1)
            gscale = np.max(np.sqrt(np.sum(lf.grad_u**2, axis=(0, 1)))) + 1e-300
            div = max(div, float(np.max(np.abs(du1 + du2)) / gscale))
            u1 = _fd4(comp("psi"), x, hy, 1)
            u2 = -_fd4(comp("psi"), x, hx, 0)
            uscale = np.max(np.hypot(*lf.u)) + 1e-300
            rel_u = max(rel_u, float(np.max(np.hypot(u1 - lf.u[0], u2 - lf.u[1])) / uscale))
            lap = _fd4_second(comp("psi"), x, hx, 0) + _fd4_second(comp("psi"), x, hy, 1)
            wscale = np.max(np.abs(lf.omega)) + 1e-300
            rel_w = max(rel_w, float(np.max(np.abs(-lap - lf.omega)) / wscale))
    out.append(_le("divergence_free", div, 1e-6, "|div u| / max |grad u| by 4th-order differences"))
    out.append(_le("velocity_from_stream", rel_u, 1e-6, "u = (d2 psi, -d1 psi)"))
    out.append(_le("vorticity_from_stream", rel_w, 1e-6, "omega = -Laplacian psi"))

    box = support_box(traj)
    ring_max = 0.0
    times = np.linspace(0.0, 1.0, n_times)
    for t in times:
        ring = _ring_points(box, 400)
        f = total_fields(traj, N, t, ring)
        ring_max = max(ring_max, max(float(np.max(np.abs(getattr(f, k)))) for k in
                                     ("psi", "u", "omega", "rho", "grad_rho", "grad_omega", "grad_u")))
    out.append(_le("exterior_ring_zero", ring_max, 0.0, f"{n_times} times, support box {tuple(round(float(b), 4) for b in box)}"))

    sym = 0.0
    for t in np.linspace(0.05, 0.995, 7):
        n = max(m for m in range(1, N + 1) if traj.sched.t[m] <= t)
        x, _ = _chart_box_points(traj, n, t, rng, n_points)
        xm = x * np.array([[1.0], [-1.0]])
        f, g = total_fields(traj, N, t, x), total_fields(traj, N, t, xm)
        pairs = ((f.psi, -g.psi), (f.omega, -g.omega), (f.u[0], g.u[0]), (f.u[1], -g.u[1]), (f.rho, g.rho))
        for p, q in pairs:
            s = np.max(np.abs(p)) + 1e-300
            sym = max(sym, float(np.max(np.abs(p - q)) / s))
    out.append(_le("odd_symmetry_in_x2", sym, 1e-14, "psi, omega, u2 odd and u1, rho even"))

    jtr = joff = 0.0
    for n in range(2, N + 1):
        for t in layer_times(traj, n, 21):
            st = traj.state(n, t)
            J = velocity_of_past_layers(traj, n, t, np.zeros(2)).J_at_0
            # chart derivatives back to physical ones: d/dx1 = a d/dy1, d/dx2 = b d/dy2
            d11, d22 = J[0, 0] * st.a, J[1, 1] * st.b
            jtr = max(jtr, abs(d11 + d22) / (abs(d11) + abs(d22) + 1e-300))
            joff = max(joff, abs(J[0, 1]), abs(J[1, 0]))
    out.append(_le("jacobian_trace_free", jtr, 1e-12, "trace of the physical gradient at the center"))
    out.append(_le("jacobian_off_diagonal", joff, 0.0))

    count = max(len(active_density_layers(traj, t)) for t in np.linspace(0.0, 1.0, 2001))
    out.append(_le("single_density_layer", count, 1, "max number of simultaneously nonzero densities"))
    return out


def _ring_points(box, count):
    x1lo, x1hi, x2lo, x2hi = box
    pad1 = 1e-9 * max(1.0, x1hi - x1lo)
    pad2 = 1e-9 * max(1.0, x2hi - x2lo)
    s = np.linspace(0.0, 1.0, count)
    lo1, hi1 = x1lo - pad1, x1hi + pad1
    lo2, hi2 = x2lo - pad2, x2hi + pad2
    x1 = np.concatenate([lo1 + (hi1 - lo1) * s, lo1 + (hi1 - lo1) * s, np.full(count, lo1), np.full(count, hi1)])
    x2 = np.concatenate([np.full(count, lo2), np.full(count, hi2), lo2 + (hi2 - lo2) * s, lo2 + (hi2 - lo2) * s])
    return np.stack([x1, x2])


# -------------------------------------------------------------------- forces


def residual_times(traj: LayerChainTrajectory, N: int) -> list[float]:
    """Five times spread over the ramps and plateaus of the first N layers."""
    sched = traj.sched
    picks = []
    for n in range(1, N + 1):
        r = RampProfile.from_schedule(sched, n)
        picks += [r.t_on + 0.5 * r.length, 0.5 * (r.t_on + r.t_off), r.t_off - 0.5 * r.length]
    if N == 1:
        r = RampProfile.from_schedule(sched, 1)
        picks += [r.t_on + 0.25 * r.length, 0.5 * (r.t_off + 1.0)]
    picks = sorted(set(picks))
    if len(picks) > 5:
        idx = np.round(np.linspace(0, len(picks) - 1, 5)).astype(int)
        picks = [picks[i] for i in idx]
    return picks


def residual_consistency(traj, N, rng, n_points=30, times=None) -> tuple[float, list[float]]:
    """Worst relative error of the residual oracle against the assembled forces."""
    times = residual_times(traj, N) if times is None else times
    worst = 0.0
    for t in times:
        n = max(m for m in range(1, N + 1) if traj.sched.t[m] <= t)
        x, _ = _chart_box_points(traj, n, t, rng, n_points)
        r = residual_oracle(traj, N, t, x)
        eo, er = r.relative_errors()
        worst = max(worst, float(np.max(eo)), float(np.max(er)))
    return worst, list(times)


def _force_checks(traj, N, rng, n_points, residual: bool) -> list[CheckResult]:
    sched = traj.sched
    out = []
    old_rho = 0.0
    odd = 0.0
    tau_ratio = 0.0
    for n in range(1, N + 1):
        for t in layer_times(traj, n, 9):
            x, y = _chart_box_points(traj, n, t, rng, n_points)
            fb = force_breakdown(traj, n, t, x)
            old_rho = max(old_rho, float(np.max(np.abs(fb.density.terms["old_transport"]))))
            fm = force_breakdown(traj, n, t, x * np.array([[1.0], [-1.0]]))
            scale = float(np.max(np.abs(fb.f_omega))) + 1e-300
            odd = max(odd, float(np.max(np.abs(fb.f_omega + fm.f_omega))) / scale)
            st = traj.state(n, t)
            bound = st.lam * (abs(st.dB_a2) + abs(st.dB_b2) + abs(st.D))
            tau = float(np.max(np.abs(fb.vorticity.terms["time_factor"])))
            if bound > 0:
                tau_ratio = max(tau_ratio, tau / bound)
            elif tau > 0:
                tau_ratio = math.inf
    out.append(_le("old_density_transport_zero", old_rho, 0.0, "u^(n) . grad P^(n-1) on [t_n, 1]"))
    out.append(_le("force_odd_in_x2", odd, 1e-12, "|f(x1,x2) + f(x1,-x2)| / max |f|"))
    d = cutoff_constants()
    const = d["d2"] + 3.0 * d["d1"]
    out.append(_le("time_factor_order_lambda", tau_ratio, const,
                   "|tau| / (lam (|d(Ba^2)| + |d(Bb^2)| + |D|)) against lam |cutoff''| + 3 |cutoff'|"))

    mean_err = 0.0
    for t in np.linspace(0.02, 0.995, 5):
        mean, bound = force_mean(traj, N, t)
        mean_err = max(mean_err, abs(mean) / bound)
    out.append(_le("force_zero_mean", mean_err, 1.0, "|grid mean of f_omega| / quadrature error bound"))

    tay = 0.0
    for n in range(2, N + 1):
        for t in layer_times(traj, n, 5)[1:]:
            st = traj.state(n, t)
            y = rng.uniform(-12 * np.pi, 12 * np.pi, (2, 50))
            w = taylor_remainder(traj, n, t, y)
            wq = taylor_remainder_quadrature(traj, n, t, y)
            tay = max(tay, float(np.max(np.abs(w - wq)) / (np.max(np.abs(w)) + 1e-300)))
    out.append(_le("taylor_remainder_forms", tay, 1e-8, "direct subtraction vs 16-node Gauss"))

    if residual:
        tol = 1e-4 if N == 1 else 1e-3
        worst, times = residual_consistency(traj, N, rng, n_points)
        out.append(_le("pde_residual", worst, tol, f"{len(times)} times x {n_points} points"))
    return out


def cutoff_constants() -> dict[str, float]:
    x = np.linspace(0.0, 16.0 * np.pi, 40001)
    v = _accel.cutoff(x)
    return {"d1": float(np.max(np.abs(v[1]))), "d2": float(np.max(np.abs(v[2])))}


def force_mean(traj, N, t, grid=(256, 256)) -> tuple[float, float]:
    """Midpoint-rule mean of sum_n f_omega^(n) over the support box and an error bound.

    The bound combines the change under grid halving with a rounding term.
    """
    box = support_box(traj)

    def integral(nx, ny):
        x1 = box[0] + (np.arange(nx) + 0.5) * (box[1] - box[0]) / nx
        x2 = box[2] + (np.arange(ny) + 0.5) * (box[3] - box[2]) / ny
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        f = 0.0
        for n in range(1, N + 1):
            f = f + force_breakdown(traj, n, t, np.stack([X1, X2])).f_omega
        dA = (box[1] - box[0]) * (box[3] - box[2]) / (nx * ny)
        return float(np.sum(f) * dA), float(np.sum(np.abs(f)) * dA)

    coarse, _ = integral(grid[0] // 2, grid[1] // 2)
    fine, absint = integral(*grid)
    return fine, abs(fine - coarse) + 1e-13 * absint + 1e-300


# ------------------------------------------------------------------- suite


def run_invariant_suite(traj: LayerChainTrajectory, N: int | None = None, seed: int = 0,
                        n_points: int = 30, ring_times: int = 20, residual: bool = True) -> SuiteReport:
    """Every dynamics, field and force invariant, each with its measured slack."""
    N = traj.N if N is None else N
    rng = np.random.default_rng(seed)
    report = SuiteReport()
    report.checks += _dynamics_checks(traj, N)
    report.checks += _field_checks(traj, N, rng, n_points, ring_times)
    report.checks += _force_checks(traj, N, rng, n_points, residual)
    return report


# ------------------------------------------------------------- convergence


@dataclass
class ConvergenceProbe:
    C_values: list[float]
    n: int
    beta: float
    beta_prime: float
    beta_dprime: float
    k_distance: list[float]
    xi_distance: list[float]
    xi_bound: list[float]
    k_slope: float
    xi_slope: float
    predicted_slope: float
    times: int

    @property
    def k_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.k_distance, self.k_distance[1:]))

    @property
    def xi_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.xi_distance, self.xi_distance[1:]))

    @property
    def below_bound(self) -> bool:
        return all(d < b for d, b in zip(self.xi_distance, self.xi_bound))

    def slope_consistent(self, factor: float = 3.0) -> bool:
        p = self.predicted_slope
        return all(s <= 0.0 and p / factor >= s >= p * factor for s in (self.k_slope, self.xi_slope))


def ideal_distances(traj: LayerChainTrajectory, n: int, samples: int = 2001) -> tuple[float, float]:
    """(sup |k_n - k_bar_n|, a_{n-1}(1) sup |Xi^(n) - Xi_0^(n)|) over [t_n, 1]."""
    sched = traj.sched
    model = IdealLayerModel.from_schedule(sched, n)
    hat = np.linspace(0.0, 1.0, samples)
    t = sched.t[n] + sched.one_minus_t(n) * hat
    sol = traj.layers[n]
    dk = np.max(np.abs(sol.kappa(t) / sol.log_scale - ideal_k(model, hat)))
    # a_{n-1}(1) Xi is the stored angle
    dxi = np.max(np.abs(sol.angle(t) - model.angle(hat)))
    return float(dk), float(dxi)


def _probe_one(base: ScheduleConfig, C: float, n: int, samples: int, tol: float, bb: float):
    cfg = ScheduleConfig(**{**base.__dict__, "C": C, "N": max(base.N, n)})
    sched = plan(cfg)
    traj = integrate_chain(sched, N=n, tol=tol)
    dk, dxi = ideal_distances(traj, n, samples)
    E = float(sched.E[n - 1])
    return dk, dxi, 14.0 * C ** (-0.5 * bb * sched.delta * sched.gamma * E)


def convergence_probe(config, C_list, n: int = 2, beta: float = 0.5, beta_prime: float = 0.5,
                      beta_dprime: float = 0.5, samples: int = 2001, tol: float = 1e-11,
                      workers: int = 1) -> ConvergenceProbe:
    """Measure the distance of layer n to its ideal model for each C.

    Each C owns its schedule and trajectory, so with ``workers > 1`` the runs
    go to a process pool; results are collected in C order either way.
    """
    base = config if isinstance(config, ScheduleConfig) else ScheduleConfig.from_mapping(config)
    Cs = [float(c) for c in C_list]
    job = partial(_probe_one, base, n=n, samples=samples, tol=tol, bb=beta * beta_prime)
    if workers > 1 and len(Cs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(Cs))) as pool:
            results = list(pool.map(job, Cs))
    else:
        results = [job(C) for C in Cs]
    kd, xd, xb = (list(col) for col in zip(*results))
    lnC = np.log(Cs)
    k_slope = float(np.polyfit(lnC, np.log(np.maximum(kd, 1e-300)), 1)[0])
    xi_slope = float(np.polyfit(lnC, np.log(np.maximum(xd, 1e-300)), 1)[0])
    E = (1.0 / (1.0 - base.gamma)) ** (n - 1)
    predicted = -0.5 * beta * beta_prime * base.delta * base.gamma * E
    return ConvergenceProbe(Cs, n, beta, beta_prime, beta_dprime, kd, xd, xb, k_slope, xi_slope, predicted, samples)


# --------------------------------------------------------------- regularity


@dataclass
class RegularityRow:
    alpha: float
    n: int
    f_omega_c_alpha: float
    f_rho_c1_alpha: float
    omega_terms: dict[str, float]
    rho_terms: dict[str, float]


@dataclass
class RegularityTable:
    rows: list[RegularityRow]
    times: dict[int, list[float]]

    def row(self, alpha: float, n: int) -> RegularityRow:
        for r in self.rows:
            if r.n == n and abs(r.alpha - alpha) <= 1e-15 * max(1.0, abs(alpha)):
                return r
        raise KeyError((alpha, n))

    def ratio(self, alpha: float, n: int, which: str) -> float:
        """r(alpha, n) = norm(n) / norm(n - 1) for which in {"omega", "rho"}."""
        key = "f_omega_c_alpha" if which == "omega" else "f_rho_c1_alpha"
        return getattr(self.row(alpha, n), key) / getattr(self.row(alpha, n - 1), key)

    def dominating_term(self, alpha: float, n: int, which: str) -> str:
        terms = self.row(alpha, n).omega_terms if which == "omega" else self.row(alpha, n).rho_terms
        return max(terms, key=terms.get)

    def dominating_ratio(self, alpha: float, n: int, which: str) -> tuple[str, float]:
        """Largest term norm of layer n over the largest term norm of layer n - 1.

        The terms are compared by rank rather than by name: a term can vanish
        identically on one layer (layer 1 has no older layers to transport).
        """
        def terms(m):
            row = self.row(alpha, m)
            return row.omega_terms if which == "omega" else row.rho_terms

        name = self.dominating_term(alpha, n, which)
        prev = max(terms(n - 1).values())
        return name, terms(n)[name] / prev if prev > 0 else math.inf


def default_regularity_times(traj: LayerChainTrajectory, n: int) -> list[float]:
    sched = traj.sched
    r = RampProfile.from_schedule(sched, n)
    return [r.t_on + 0.5 * r.length, 0.5 * (r.t_on + r.t_off), r.t_off - 0.5 * r.length]


def _layer_grid(traj, n, t, per_radian):
    st = traj.state(n, t)
    reach = 16.0 * np.pi / st.lam
    m = max(16, int(math.ceil(2.0 * reach * per_radian)) + 1)
    box = (st.center - reach / st.a, st.center + reach / st.a, -reach / st.b, reach / st.b)
    return box, (m, m)


def regularity_sweep(traj: LayerChainTrajectory, N: int, alpha_list, times=None, per_radian: float = 2.0,
                     strategy: HolderStrategy | None = None) -> RegularityTable:
    """Layer-wise C^alpha norms of f_omega and C^{1,alpha} norms of f_rho.

    Each layer is sampled on a grid covering its cutoff support in its own
    chart; the norm of a layer is the largest value over its sampled times.
    """
    strategy = strategy or HolderStrategy(random_pairs=20_000)
    times = {n: (default_regularity_times(traj, n) if times is None else list(times[n])) for n in range(1, N + 1)}
    cache = {}
    for n in range(1, N + 1):
        for t in times[n]:
            box, grid = _layer_grid(traj, n, t, per_radian)
            g1 = np.linspace(box[0], box[1], grid[0])
            g2 = np.linspace(box[2], box[3], grid[1])
            X1, X2 = np.meshgrid(g1, g2, indexing="ij")
            fb = force_breakdown(traj, n, t, np.stack([X1, X2]))
            cache[(n, t)] = (box, grid, fb)
    rows = []
    for alpha in alpha_list:
        for n in range(1, N + 1):
            w_norm = r_norm = 0.0
            w_terms: dict[str, float] = {}
            r_terms: dict[str, float] = {}
            for t in times[n]:
                box, grid, fb = cache[(n, t)]

                def est(vals, name):
                    return holder_estimate(None, box, grid, alpha, strategy, name, t, values=vals)

                w_norm = max(w_norm, est(fb.f_omega, "f_omega").c_alpha_norm)
                r_norm = max(r_norm, est(fb.f_rho, "f_rho").c1_alpha_norm)
                for k, v in fb.vorticity.terms.items():
                    w_terms[k] = max(w_terms.get(k, 0.0), est(v, k).c_alpha_norm)
                for k, v in fb.density.terms.items():
                    r_terms[k] = max(r_terms.get(k, 0.0), est(v, k).c1_alpha_norm)
            rows.append(RegularityRow(float(alpha), n, w_norm, r_norm, w_terms, r_terms))
    return RegularityTable(rows, times)


# ------------------------------------------------------------------ blow-up


@dataclass
class BlowupLayer:
    n: int
    M: float
    grad_rho_integral: float
    omega_max_at_switch: float  # total vorticity on the layer-n grid
    omega_ratio: float  # own-layer vorticity max / (2 M_n)
    omega_total_ratio: float
    grad_rho_at_switch: float


@dataclass
class BlowupReport:
    layers: list[BlowupLayer]

    def integral_ok(self, factor: float = 0.95) -> bool:
        return all(L.grad_rho_integral >= 2.0 * L.M * factor for L in self.layers)

    def M_increasing(self) -> bool:
        return all(b.M > a.M for a, b in zip(self.layers, self.layers[1:]))


def _aligned_grid(traj, n, t, half_steps: int):
    """Chart-n grid at multiples of pi/2 covering the layer support."""
    st = traj.state(n, t)
    k = int(math.ceil(16.0 / st.lam)) * 2  # multiples of pi/2 up to 16 pi / lam
    k = min(k, half_steps)
    y = 0.5 * np.pi * np.arange(-k, k + 1)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    return np.stack([st.center + Y1 / st.a, Y2 / st.b])


def blowup_tracker(traj: LayerChainTrajectory, N: int | None = None, grid: int = 400, nodes: int = 16) -> BlowupReport:
    """Time integral of the grid max of |d rho / d x2| over each layer's window.

    Quadrature panels split each window at the ramp breakpoints so the
    integrand is smooth on every panel.
    """
    N = traj.N if N is None else N
    sched = traj.sched
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    out = []
    for n in range(1, N + 1):
        r = RampProfile.from_schedule(sched, n)
        L, w = r.length, r.width
        cuts = [r.t_on, r.t_on + w, r.t_on + L - w, r.t_on + L, r.t_off - L, r.t_off - L + w, r.t_off - w, r.t_off]
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            for xk, wk in zip(gx, gw):
                t = 0.5 * (lo + hi) + half * xk
                pts = _aligned_grid(traj, n, t, grid)
                f = total_fields(traj, N, t, pts)
                total += half * wk * float(np.max(np.abs(f.grad_rho[1])))
        pts = _aligned_grid(traj, n, r.t_off, grid)
        f = total_fields(traj, N, r.t_off, pts)
        wmax = float(np.max(np.abs(f.omega)))
        own = float(np.max(np.abs(layer_fields(traj, n, r.t_off, pts).omega)))
        two_m = 2.0 * float(sched.M[n])
        out.append(BlowupLayer(n, float(sched.M[n]), float(total), wmax, own / two_m, wmax / two_m,
                               float(np.max(np.abs(f.grad_rho[1])))))
    return BlowupReport(out)


def critical_alpha() -> float:
    return optimal_exponents().alpha_star
