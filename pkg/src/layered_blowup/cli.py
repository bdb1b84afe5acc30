"""Command line front end: configuration, orchestration and artifact output.

Config files are flat ``key = value`` text.  ``#`` starts a comment, list
values are comma separated, and ``auto`` selects a computed default.
``--set key=value`` overrides file keys.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import click
import numpy as np

from .dynamics import DomainError, LayerChainTrajectory, integrate_chain
from .fields import support_box, total_fields
from .forces import ResidualStepError, force_breakdown
from .norms import HolderStrategy, holder_estimate
from .pendulum import IdealLayerModel, IntegrationError, ideal_xi, limit_profile
from .reporting import config_hash, svg_plot, write_csv
from .schedule import ParamSchedule, ScheduleConfig, ScheduleError, optimal_exponents, plan
from .verify import CheckResult, SuiteReport, blowup_tracker, convergence_probe, regularity_sweep, run_invariant_suite

OUT_ENV = "LAYERED_BLOWUP_OUT"
EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CAP = 1, 2, 125


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    C: float = 10.0
    gamma: float = 0.5
    delta: float = 0.05
    mu: float = 0.01
    zeta: float = 0.01
    eps: float = 0.1
    k_max: float | None = None
    Lambda: float | None = None
    N: int = 2
    ode_tol: float = 1e-11
    grid_box: tuple[float, ...] | None = None  # None: support box, or chart box when grid_layer > 0
    grid_nx: int = 65
    grid_ny: int = 65
    grid_layer: int | None = None  # None: newest active layer's chart; 0: physical; n: chart of layer n
    times: tuple[float, ...] | None = None
    alpha: tuple[float, ...] | None = None
    C_sweep: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    samples: int = 401
    n_points: int = 30
    seed: int = 0
    jobs: int = 1  # worker processes for the C sweep; results do not depend on it
    out: str = "out"

    def schedule_config(self) -> ScheduleConfig:
        return ScheduleConfig(self.C, self.gamma, self.delta, self.mu, self.zeta, self.eps, self.N,
                              self.k_max, self.Lambda)

    def alphas(self) -> tuple[float, ...]:
        if self.alpha is not None:
            return self.alpha
        return (0.5 * optimal_exponents().alpha_star, 0.99)

    def hash_items(self) -> dict:
        items = asdict(self)
        items.pop("out")
        items.pop("jobs")
        return items


def _auto(v: str) -> bool:
    return v.strip().lower() in ("auto", "")


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


_PARSERS = {
    "k_max": lambda v: None if _auto(v) else float(v),
    "Lambda": lambda v: None if _auto(v) else float(v),
    "grid_box": lambda v: None if _auto(v) else _floats(v),
    "times": lambda v: None if _auto(v) else _floats(v),
    "alpha": lambda v: None if _auto(v) else _floats(v),
    "C_sweep": _floats,
    "grid_layer": lambda v: None if _auto(v) else int(v),
    "out": str.strip,
}


def parse_config_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    return raw


def build_config(raw: dict[str, str]) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        try:
            if key in _PARSERS:
                kwargs[key] = _PARSERS[key](value)
            elif types[key] in ("int", int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    cfg = RunConfig(**kwargs)
    if cfg.grid_box is not None and len(cfg.grid_box) != 4:
        raise ConfigError("grid_box needs four numbers: x1_lo, x1_hi, x2_lo, x2_hi")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if cfg.grid_nx < 8 or cfg.grid_ny < 8:
        raise ConfigError("grid_nx and grid_ny must be at least 8")
    if cfg.grid_layer is not None and not 0 <= cfg.grid_layer <= cfg.N:
        raise ConfigError("grid_layer must lie in [0, N]")
    if any(not 0.0 < a < 1.0 for a in cfg.alphas()):
        raise ConfigError("alpha values must lie in (0, 1)")
    return cfg


class Run:
    """Resolved configuration, schedule and output directory of one invocation."""

    def __init__(self, cfg: RunConfig, out: Path, perturb=None):
        self.cfg = cfg
        self.out = out
        self.perturb = perturb
        self.sched: ParamSchedule = plan(cfg.schedule_config())
        items = cfg.hash_items()
        if perturb:
            items["perturb"] = tuple(perturb)
        self.chash = config_hash(items)

    def trajectory(self) -> LayerChainTrajectory:
        traj = integrate_chain(self.sched, tol=self.cfg.ode_tol)
        if self.perturb:
            what, size = self.perturb
            if what != "k":
                raise ConfigError(f"unknown perturbation {what!r}; only 'k' is supported")
            traj = traj.with_k_offset(traj.N, float(size))
        return traj

    def csv(self, name, header, rows):
        path = write_csv(self.out / name, header, rows, self.chash)
        click.echo(f"wrote {path}")
        return path

    def svg(self, name, *args, **kw):
        path = svg_plot(self.out / name, *args, **kw)
        click.echo(f"wrote {path}")
        return path

    def times(self, traj: LayerChainTrajectory) -> list[float]:
        if self.cfg.times is not None:
            return list(self.cfg.times)
        s = self.sched
        return [0.5 * (float(s.t[n]) + float(s.t[n + 1])) for n in range(1, traj.N + 1)]

    def grid(self, traj: LayerChainTrajectory, t: float):
        cfg = self.cfg
        layer = cfg.grid_layer
        if layer is None:
            layer = max(n for n in range(1, traj.N + 1) if traj.state(n, t).active)
        if layer == 0:
            box = cfg.grid_box or support_box(traj)
            g1 = np.linspace(box[0], box[1], cfg.grid_nx)
            g2 = np.linspace(box[2], box[3], cfg.grid_ny)
            X1, X2 = np.meshgrid(g1, g2, indexing="ij")
            return tuple(float(b) for b in box), np.stack([X1, X2])
        st = traj.state(layer, t)
        if not st.active:
            raise ConfigError(f"layer {layer} is not active at t = {t}")
        reach = 16.0 * math.pi / st.lam
        cb = cfg.grid_box or (-reach, reach, -reach, reach)
        g1 = st.center + np.linspace(cb[0], cb[1], cfg.grid_nx) / st.a
        g2 = np.linspace(cb[2], cb[3], cfg.grid_ny) / st.b
        X1, X2 = np.meshgrid(g1, g2, indexing="ij")
        return (float(g1[0]), float(g1[-1]), float(g2[0]), float(g2[-1])), np.stack([X1, X2])


def _load(config_path, sets, out, perturb=None) -> Run:
    raw = parse_config_text(Path(config_path).read_text()) if config_path else {}
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    cfg = build_config(raw)
    out_dir = Path(out or os.environ.get(OUT_ENV) or cfg.out)
    return Run(cfg, out_dir, perturb)


def _common(f):
    f = click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                     help=f"Output directory (overrides the config and ${OUT_ENV}).")(f)
    f = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a config key.")(f)
    f = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="key = value config file.")(f)
    return f


def _guarded(body):
    """Run body() and translate failures into the documented exit codes."""
    try:
        code = body()
    except (ConfigError, ScheduleError) as exc:
        click.echo(f"config error: {exc}", err=True)
        code = EXIT_CONFIG
    except (IntegrationError, DomainError, ResidualStepError, FloatingPointError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        code = EXIT_NUMERICAL
    sys.exit(code or 0)


@click.group()
def main():
    """Layered blow-up construction: schedules, trajectories, fields, forces and checks."""


# ---------------------------------------------------------------- plan


@main.command("plan")
@_common
def plan_cmd(config_path, sets, out):
    """Print and write the parameter schedule."""

    def body():
        run = _load(config_path, sets, out)
        s = run.sched
        crit = optimal_exponents()
        click.echo(f"alpha_star = {crit.alpha_star:.17g}  (sqrt(4/3) - 1)")
        click.echo(f"k_max = {s.k_max:.17g}  Lambda = {s.Lambda:.17g}  Y = {s.Y:.17g}")
        click.echo(f"regimes: Y {s.y_regime}, final {s.final_regime}")
        header = ["n", "t_n", "one_minus_t_n", "E_n", "lam_n", "log_C_lam_n", "M_n", "log_C_M_n", "z_n", "hat_t_max_n"]
        rows = []
        for n in s.layers:
            rows.append([n, float(s.t[n]), s.one_minus_t(n), float(s.E[n]), float(s.lam[n]),
                         float(s.log_lam[n]) / s.log_C, float(s.M[n]), float(s.log_M[n]) / s.log_C,
                         float(s.z[n]), float(s.hat_t_max[n])])
        click.echo("  ".join(header))
        for r in rows:
            click.echo("  ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in r))
        run.csv("schedule.csv", header, rows)
        return 0

    _guarded(body)


# ------------------------------------------------------------ simulate


@main.command("simulate")
@_common
def simulate_cmd(config_path, sets, out):
    """Integrate the layer chain; write trajectories and profile plots."""

    def body():
        run = _load(config_path, sets, out)
        traj = run.trajectory()
        s = run.sched
        hat = np.linspace(0.0, 1.0, run.cfg.samples)
        rows = []
        sin_series, k_series = [], []
        for n in range(1, traj.N + 1):
            t = s.t[n] + s.one_minus_t(n) * hat
            t[-1] = 1.0
            k = np.asarray(traj.k(n, t)) + 0.0 * t
            lnb = np.asarray(traj.log_b(n, t)) + 0.0 * t
            amp = np.asarray(traj.B_times_a2b2(n, t)) + 0.0 * t
            sin_prof = np.sin(np.asarray(traj.layers[n].angle(t)) + 0.0 * t)
            c1 = traj.center_one
            rows += [[n, ti, hi, c1, ki, bi, ai] for ti, hi, ki, bi, ai in zip(t, hat, k, lnb, amp)]
            run.csv(f"profile_layer{n}.csv", ["t", "hat_t", "k_n", "sin_a_xi", "B_n_times_a2b2"],
                    zip(t, hat, k, sin_prof, amp))
            sin_series.append((f"layer {n}", hat, sin_prof, False))
            k_series.append((f"k_{n}", hat, k, False))
            if n >= 2:
                i = int(np.argmax(sin_prof))
                click.echo(f"layer {n}: sin profile peak {sin_prof[i]:.12f} at hat_t = {hat[i]:.6f}")
        run.csv("trajectory.csv", ["n", "t", "hat_t", "center1", "k_n", "ln_b_n", "B_n_times_a2b2"], rows)
        model = IdealLayerModel.from_schedule(s, traj.N)
        sin_series.append(("ideal 1/cosh", hat, ideal_xi(model, hat), True))
        k_series.append(("tent", hat, limit_profile(hat, s.k_max), True))
        run.svg("sin_profile.svg", "sin(a_(n-1)(1) Xi_n) against the ideal profile", sin_series,
                "rescaled time", "sin profile")
        run.svg("k_profile.svg", "aspect exponent k_n against the tent", k_series, "rescaled time", "k_n")
        return 0

    _guarded(body)


# -------------------------------------------------------------- fields


@main.command("fields")
@_common
def fields_cmd(config_path, sets, out):
    """Sample the superposed fields on the configured grid; write values and norms."""

    def body():
        run = _load(config_path, sets, out)
        traj = run.trajectory()
        rows, norm_rows = [], []
        strategy = HolderStrategy(seed=run.cfg.seed)
        for t in run.times(traj):
            box, X = run.grid(traj, t)
            f = total_fields(traj, traj.N, t, X)
            cols = (X[0], X[1], f.psi, f.u[0], f.u[1], f.omega, f.rho)
            rows += [[t, *vals] for vals in zip(*(c.ravel() for c in cols))]
            grid = X.shape[1:]
            for name, F in (("omega", f.omega), ("rho", f.rho)):
                for a in run.cfg.alphas():
                    rep = holder_estimate(None, box, grid, a, strategy, name, t, values=F)
                    norm_rows.append(list(rep.row().values()))
        run.csv("fields.csv", ["t", "x1", "x2", "psi", "u1", "u2", "omega", "rho"], rows)
        run.csv("norms.csv", ["field", "t", "alpha", "sup", "c_alpha", "c1", "c1_alpha", "marg1", "marg2", "pairs"],
                norm_rows)
        return 0

    _guarded(body)


# -------------------------------------------------------------- forces


@main.command("forces")
@_common
def forces_cmd(config_path, sets, out):
    """Write the term-by-term force decomposition of every active layer."""

    def body():
        run = _load(config_path, sets, out)
        traj = run.trajectory()
        rows = []
        for t in run.times(traj):
            _, X = run.grid(traj, t)
            x1, x2 = X[0].ravel(), X[1].ravel()
            for n in range(1, traj.N + 1):
                if not traj.state(n, t).active:
                    continue
                fb = force_breakdown(traj, n, t, X)
                for half, prefix in ((fb.density, "rho"), (fb.vorticity, "omega")):
                    named = list(half.terms.items()) + [("total", half.total)]
                    for term, vals in named:
                        rows += [[n, t, a, b, f"{prefix}.{term}", v] for a, b, v in zip(x1, x2, np.ravel(vals))]
        run.csv("forces.csv", ["n", "t", "x1", "x2", "term_name", "value"], rows)
        return 0

    _guarded(body)


# -------------------------------------------------------------- verify


def blowup_checks(traj: LayerChainTrajectory) -> list[CheckResult]:
    rep = blowup_tracker(traj)
    checks = []
    for L in rep.layers:
        checks.append(CheckResult(f"blowup_integral_layer{L.n}", L.grad_rho_integral >= 1.9 * L.M,
                                  L.grad_rho_integral, 1.9 * L.M, ">=", "time integral of max |d rho/d x2| vs 0.95 * 2 M"))
        checks.append(CheckResult(f"switch_time_density_zero_layer{L.n}", L.grad_rho_at_switch == 0.0,
                                  L.grad_rho_at_switch, 0.0, "<=", "max |d rho/d x2| at t_(n+1)"))
    inc = rep.M_increasing()
    checks.append(CheckResult("M_increasing", inc, float(inc), 1.0, ">=", "M_n strictly increasing"))
    return checks


@main.command("verify")
@_common
@click.option("--perturb", nargs=2, type=(str, float), default=None, metavar="QUANTITY SIZE",
              help="Inject a fault, e.g. '--perturb k 1e-3' shifts k_N.")
def verify_cmd(config_path, sets, out, perturb):
    """Run every invariant check; exit status counts the failures."""

    def body():
        run = _load(config_path, sets, out, perturb)
        traj = run.trajectory()
        report = run_invariant_suite(traj, seed=run.cfg.seed, n_points=run.cfg.n_points)
        report = SuiteReport(report.checks + blowup_checks(traj))
        lines = report.lines()
        for ln in lines:
            click.echo(ln)
        fails = len(report.failures())
        click.echo(f"{len(report.checks) - fails} passed, {fails} failed")
        run.out.mkdir(parents=True, exist_ok=True)
        (run.out / "verify.txt").write_text(f"# config_hash={run.chash}\n" + "\n".join(lines) + "\n")
        run.csv("verify.csv", ["name", "passed", "measured", "relation", "tolerance", "detail"],
                [[c.name, c.passed, c.measured, c.relation, c.tolerance, c.detail] for c in report.checks])
        return 0 if fails == 0 else min(EXIT_NUMERICAL + fails, EXIT_CAP)

    _guarded(body)


# --------------------------------------------------------------- probe


@main.command("probe")
@_common
@click.option("--layer", "n", default=2, show_default=True, help="Layer compared with its ideal model.")
def probe_cmd(config_path, sets, out, n):
    """Distance of layer n to its ideal model across the C sweep."""

    def body():
        run = _load(config_path, sets, out)
        for C in run.cfg.C_sweep:
            plan(replace(run.cfg.schedule_config(), C=C, N=max(run.cfg.N, n)))
        pr = convergence_probe(run.cfg.schedule_config(), run.cfg.C_sweep, n=n, tol=run.cfg.ode_tol,
                                workers=run.cfg.jobs)
        rows = list(zip(pr.C_values, pr.k_distance, pr.xi_distance, pr.xi_bound))
        for C, dk, dx, b in rows:
            click.echo(f"C={C:g}: sup|k-k_bar|={dk:.3e}  a(1) sup|Xi-Xi_0|={dx:.3e}  bound={b:.3e}")
        click.echo(f"k decreasing: {pr.k_decreasing}  Xi decreasing: {pr.xi_decreasing}  below bound: {pr.below_bound}")
        click.echo(f"slopes: k {pr.k_slope:.3f}, Xi {pr.xi_slope:.3f}, predicted {pr.predicted_slope:.3f}")
        run.csv("probe.csv", ["C", "k_distance", "xi_distance", "xi_bound"], rows)
        return 0

    _guarded(body)


# --------------------------------------------------------------- sweep


@main.command("sweep")
@_common
def sweep_cmd(config_path, sets, out):
    """Layer-wise Hölder norms of the forces for each alpha."""

    def body():
        run = _load(config_path, sets, out)
        traj = run.trajectory()
        table = regularity_sweep(traj, traj.N, run.cfg.alphas(), strategy=HolderStrategy(20_000, run.cfg.seed))
        rows = []
        for r in table.rows:
            rows.append([r.alpha, r.n, "f_omega", "total", r.f_omega_c_alpha])
            rows.append([r.alpha, r.n, "f_rho", "total", r.f_rho_c1_alpha])
            rows += [[r.alpha, r.n, "f_omega", k, v] for k, v in r.omega_terms.items()]
            rows += [[r.alpha, r.n, "f_rho", k, v] for k, v in r.rho_terms.items()]
        for a in run.cfg.alphas():
            for n in range(2, traj.N + 1):
                for which in ("omega", "rho"):
                    name, dr = table.dominating_ratio(a, n, which)
                    click.echo(f"alpha={a:.6g} n={n} f_{which}: r={table.ratio(a, n, which):.4g}  "
                               f"dominating {name} ratio={dr:.4g}")
        run.csv("regularity.csv", ["alpha", "n", "force", "term", "norm"], rows)
        return 0

    _guarded(body)


if __name__ == "__main__":
    main()
