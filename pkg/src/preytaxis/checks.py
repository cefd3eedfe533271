"""Invariant suites behind ``preytaxis check``.

Each suite returns ``(passed, detail)``. Suites are small enough to run in
seconds; the acceptance tests run the heavier versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import lyapunov_L1
from .grid import Grid, laplacian, sample_coefficient, taxis_divergence
from .integrator import Model, StepController, heun_step, homogeneous_ode_integrate, rhs, simulate
from .model import ModelParams, TaxisSpec
from .timenorms import (T_bound_constant, TimeSeries, comparison_constant, lp_eps_time_norm, lp_time_norm,
                        operator_T, operator_T_series)

SLACK = 1e-8


def random_step_series(rng, n_pieces=None, t_end=None):
    n = int(n_pieces or rng.integers(3, 40))
    t_end = float(t_end or rng.uniform(0.5, 20.0))
    inner = np.sort(rng.uniform(0, t_end, n - 1))
    breaks = np.concatenate([[0.0], inner, [t_end]])
    # guard against coincident breaks
    breaks = np.maximum.accumulate(breaks + np.arange(n + 1) * 1e-9)
    return TimeSeries.step(breaks, rng.normal(size=n) * rng.uniform(0.1, 5.0))


# --------------------------------------------------------------------------
# weighted-norm suites


def check_hoelder(count=100, seed=1):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        f = random_step_series(rng)
        g = TimeSeries.step(f.times, rng.normal(size=f.values.size))
        e1, e2 = rng.uniform(0.05, 2.0, size=2)
        p1 = rng.uniform(1.0, 6.0)
        p2 = rng.choice([p1 / (p1 - 1) if p1 > 1 else math.inf, rng.uniform(1.0, 6.0)])
        p = 1.0 / (1.0 / p1 + (0.0 if p2 == math.inf else 1.0 / p2))
        if p < 1:
            p2 = p1 / (p1 - 1) if p1 > 1 else math.inf
            p = 1.0
        t = rng.uniform(0.2, 1.0) * f.end
        lhs = lp_eps_time_norm(f * g, p, e1 + e2, t)
        rhs_ = lp_eps_time_norm(f, p1, e1, t) * lp_eps_time_norm(g, p2, e2, t)
        worst = max(worst, lhs - rhs_ - SLACK * (1 + rhs_))
    return worst <= 0, f"{count} series, worst excess {worst:.3g}"


def check_sandwich(count=100, seed=2):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        f = random_step_series(rng)
        eps = rng.uniform(0.01, 3.0)
        t = float(f.times[rng.integers(1, f.times.size)])
        inner = lp_eps_time_norm(f, math.inf, eps, t)
        sup = f.sup(t)
        outer = max(lp_eps_time_norm(f, math.inf, eps, s) for s in f.times[1:] if s <= t)
        worst = max(worst, inner - sup - SLACK, sup - outer - SLACK)
    return worst <= 0, f"{count} series, worst excess {worst:.3g}"


def check_comparison(count=100, seed=3):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        f = random_step_series(rng)
        p = rng.uniform(1.0, 4.0)
        q = rng.choice([math.inf, p + rng.uniform(0.0, 6.0)])
        eps = rng.uniform(0.05, 3.0)
        lhs = lp_eps_time_norm(f, p, eps, f.end)
        rhs_ = comparison_constant(p, q, eps) * lp_time_norm(f, q, f.end)
        worst = max(worst, lhs - rhs_ - SLACK * (1 + rhs_))
    return worst <= 0, f"{count} series, worst excess {worst:.3g}"


def check_operator_T(count=50, seed=4):
    ones = TimeSeries(np.linspace(0.0, 40.0, 401), np.ones(401))
    val = operator_T(ones, 0.5, 1.0, 40.0)
    ok_closed = abs(val - (1 + math.sqrt(math.pi))) <= 1e-4
    rng = np.random.default_rng(seed)
    worst_ratio, worst_bound = 0.0, 0.0
    p, q, rho, lam, eps = 2.0, 4.0, 0.5, 1.0, 0.5
    bound = T_bound_constant(p, q, rho, lam, eps)
    ok_bound = True
    for _ in range(count):
        for t in (1.0, 10.0, 100.0):
            n = int(rng.integers(2, 10))
            f = random_step_series(rng, n_pieces=n, t_end=t)
            nodes = np.linspace(0.0, t, 257)
            Tf = operator_T_series(f, rho, lam, nodes)
            ratio = lp_eps_time_norm(Tf, q, eps, t) / lp_eps_time_norm(f, p, eps, t)
            worst_ratio = max(worst_ratio, ratio)
            ok_bound &= ratio <= bound
    worst_bound = bound
    return (ok_closed and ok_bound,
            f"T(1)(40) = {val:.10f}, max ratio {worst_ratio:.4f} vs bound {worst_bound:.4f}")


# --------------------------------------------------------------------------
# discretisation suites


def check_conservation():
    rng = np.random.default_rng(5)
    worst = 0.0
    for dims in ((40,), (12, 10)):
        grid = Grid(tuple(1.0 for _ in dims), dims)
        V = rng.uniform(0.5, 2.0, size=dims)
        W = rng.uniform(0.1, 2.0, size=dims)
        chi = sample_coefficient("1.5 + 0.5*cos(3*x)", grid)
        spec = TaxisSpec("saturated", n=len(dims))
        for out in (laplacian(V, grid), taxis_divergence(V, W, chi, spec, grid)):
            worst = max(worst, abs(float(np.sum(out)) * grid.cell_volume))
    # consistency: h(z) = z, W = 2 reduces the taxis operator to 2 * laplacian
    grid = Grid.uniform(64)
    V = np.cos(np.pi * grid.centers[0]) + 0.3 * np.cos(2 * np.pi * grid.centers[0])
    tax = taxis_divergence(V, np.full(64, 2.0), sample_coefficient(1.0, grid), TaxisSpec("linear"), grid)
    consistent = float(np.abs(tax - 2 * laplacian(V, grid)).max())
    # orientation: predators gather where prey peaks
    params = ModelParams(deltaX=0.1, deltaY=0.1, deltaZ=0.1)
    model = Model.build(params, grid, TaxisSpec("linear"))
    x = grid.centers[0]
    U = np.stack([1 + 0.5 * np.exp(-50 * (x - 0.5) ** 2), np.full(64, 0.5), np.full(64, 0.5)])
    drift = rhs(U, model) - rhs(U, model, with_taxis=False)
    oriented = drift[1][32] > 0
    ok = worst <= 1e-12 and consistent <= 1e-10 and oriented
    return ok, f"max |sum| {worst:.2e}, taxis-vs-2*laplacian {consistent:.2e}, aggregation at prey peak: {oriented}"


def _order(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def spatial_orders(levels=(32, 64, 128, 256)):
    """Observed orders for both operators on smooth manufactured fields."""
    lap_err, tax_err = [], []
    spec = TaxisSpec("saturated")
    for n in levels:
        grid = Grid.uniform(n)
        x = grid.centers[0]
        V = np.cos(np.pi * x)
        lap_err.append(np.abs(laplacian(V, grid) + np.pi**2 * V).max())
        # div(chi h(W) V') with chi = 2 + sin(2 pi x), W = 1 + 0.5 cos(pi x)
        W = 1 + 0.5 * np.cos(np.pi * x)
        chi = sample_coefficient("2 + sin(2*pi*x)", grid)
        hW = W / (1 + W)
        dh = 1 / (1 + W) ** 2 * (-0.5 * np.pi * np.sin(np.pi * x))
        c = 2 + np.sin(2 * np.pi * x)
        dc = 2 * np.pi * np.cos(2 * np.pi * x)
        Vx, Vxx = -np.pi * np.sin(np.pi * x), -np.pi**2 * np.cos(np.pi * x)
        exact = dc * hW * Vx + c * dh * Vx + c * hW * Vxx
        tax_err.append(np.abs(taxis_divergence(V, W, chi, spec, grid) - exact).max())
    return _order(lap_err), _order(tax_err), lap_err, tax_err


def temporal_orders(dts=(0.01, 0.005, 0.0025, 0.00125), t_end=0.4):
    """Fixed-step Heun self-convergence against a 4x finer reference."""
    grid = Grid.uniform(24)
    params = ModelParams(deltaX=0.05, deltaY=0.05, deltaZ=0.05)
    model = Model.build(params, grid, TaxisSpec("saturated"), chi1="2 + sin(2*pi*x)", tau1=0.5)
    x = grid.centers[0]
    U0 = np.stack([0.6 + 0.2 * np.cos(np.pi * x), 0.5 + 0.1 * np.cos(2 * np.pi * x), 0.4 + 0.1 * np.cos(np.pi * x)])

    def run(dt):
        U = U0.copy()
        for _ in range(int(round(t_end / dt))):
            U, _ = heun_step(U, dt, model)
        return U

    ref = run(dts[-1] / 4)
    errs = [float(np.abs(run(dt) - ref).max()) for dt in dts]
    return _order(errs), errs


def check_convergence():
    lap, tax, _, _ = spatial_orders()
    tim, _ = temporal_orders()
    ok = all(np.all((o >= 1.8) & (o <= 2.2)) for o in (lap, tax, tim))
    return ok, f"laplacian {np.round(lap, 3)}, taxis {np.round(tax, 3)}, Heun {np.round(tim, 3)}"


# --------------------------------------------------------------------------
# simulation suites


def check_oracle():
    grid = Grid.uniform(16)
    params = ModelParams(deltaX=0.01, deltaY=0.01, deltaZ=0.01)
    model = Model.build(params, grid, TaxisSpec("saturated"), chi1="2 + sin(2*pi*x)")
    U0 = np.full((3, 16), 0.5)
    res = simulate(model, U0, 2.0, StepController(tol=1e-7, dt_max=1.0))
    ode = homogeneous_ode_integrate(params, [0.5, 0.5, 0.5], 2.0).final
    err = float(np.abs(res.state - ode[:, None]).max())
    return res.completed and err <= 1e-6, f"sup deviation from ODE oracle {err:.2e}"


@dataclass
class SuiteCase:
    model: Model
    U0: np.ndarray
    t_end: float
    label: str


def randomized_cases(count=10, seed=2024, t_end=20.0):
    """Positive smooth initial data with mixed taxis families and coefficients."""
    rng = np.random.default_rng(seed)
    fams = [
        lambda n: TaxisSpec("linear", c=rng.uniform(0.5, 1.5), n=n) if n == 1 else TaxisSpec("saturated", n=n),
        lambda n: TaxisSpec("saturated", eps=rng.uniform(0.5, 2.0), m=0.5, n=n),
        lambda n: TaxisSpec("ricker", eps=rng.uniform(0.2, 0.5), n=n),
        lambda n: TaxisSpec("constant", c=rng.uniform(0.05, 0.2), n=n),
        lambda n: TaxisSpec("tabulated", table_z=(0.0, 0.5, 1.0, 2.0, 4.0), table_h=(0.0, 0.4, 0.7, 1.0, 1.2),
                            alpha=0.0, n=n),
    ]
    cases = []
    for i in range(count):
        n = 2 if i % 4 == 3 else 1
        grid = Grid((1.0,) * n, (32,) if n == 1 else (12, 12))
        # keep the cell Peclet number of the taxis drift moderate (diffusion-dominated regime)
        delta = rng.uniform(0.04, 0.1, size=3)
        params = ModelParams(r=rng.uniform(0.5, 1.5), K=rng.uniform(0.8, 1.5), d1=rng.uniform(0.3, 0.6),
                             d2=rng.uniform(0.15, 0.3), mu1=rng.uniform(0.8, 1.2), mu2=rng.uniform(0.8, 1.2),
                             deltaX=delta[0], deltaY=delta[1], deltaZ=delta[2])
        spec = fams[i % len(fams)](n)
        a, b = rng.uniform(0.2, 0.5, size=2)
        chi1 = f"{0.6 + a:.3f} + {a:.3f}*cos(2*pi*x)"
        chi2 = f"{0.6 + b:.3f} + {0.5 * b:.3f}*sin(3*x)"
        tau = f"{rng.uniform(0, 1):.3f}*(1 + tanh(x - 0.5))"
        model = Model.build(params, grid, spec, chi1, chi2, tau, rng.uniform(0, 0.5))
        mesh = grid.mesh()
        U0 = []
        for _ in range(3):
            base = rng.uniform(0.2, 1.2)
            field = np.ones(grid.shape) * base
            for _ in range(3):
                k = rng.integers(1, 3, size=n)
                term = rng.uniform(-0.2, 0.2) * base
                for kk, x in zip(k, mesh):
                    term = term * np.cos(kk * np.pi * x)
                field = field + term
            U0.append(field)
        cases.append(SuiteCase(model, np.stack(U0), t_end, f"case{i}:{spec.family}:n={n}"))
    return cases


@dataclass
class SuiteOutcome:
    label: str
    status: str
    nonpositive_states: int
    accepted: int
    ceiling_excess: float
    mass_excess: float
    monitor_counts: dict


def run_case(case: SuiteCase, controller=None):
    from .diagnostics import mass_bound, mass_functional, prey_ceiling

    p, grid = case.model.params, case.model.grid
    ceiling = prey_ceiling(p, case.U0[0]) + 1e-8 * p.K
    mbound = mass_bound(p, case.U0, grid) + 1e-6
    stats = {"bad": 0, "ceil": -math.inf, "mass": -math.inf}

    def hook(t, U):
        if not np.all(U > 0):
            stats["bad"] += 1
        stats["ceil"] = max(stats["ceil"], float(U[0].max()) - ceiling)
        stats["mass"] = max(stats["mass"], mass_functional(U, p, grid) - mbound)

    res = simulate(case.model, case.U0, case.t_end, controller or StepController(dt_max=0.5), diag_interval=1.0,
                   on_step=hook)
    # records are a subset of accepted states, but check them explicitly as well
    ceil_rec = float(np.max(res.diagnostics.column("Linf_X"))) - ceiling
    mass_rec = float(np.max(res.diagnostics.column("mass"))) - mbound
    return SuiteOutcome(case.label, res.status, stats["bad"], res.controller.accepted,
                        max(stats["ceil"], ceil_rec), max(stats["mass"], mass_rec), dict(res.monitor.counts))


def check_positivity(count=3, t_end=5.0):
    outs = [run_case(c) for c in randomized_cases(count, t_end=t_end)]
    ok = all(o.status == "completed" and o.nonpositive_states == 0 for o in outs)
    return ok, f"{len(outs)} runs, {sum(o.accepted for o in outs)} accepted states, " \
               f"{sum(o.nonpositive_states for o in outs)} nonpositive"


def check_monitors(count=3, t_end=5.0):
    outs = [run_case(c) for c in randomized_cases(count, seed=77, t_end=t_end)]
    ok = all(o.status == "completed" and o.ceiling_excess <= 0 and o.mass_excess <= 0 for o in outs)
    return ok, (f"worst ceiling excess {max(o.ceiling_excess for o in outs):.3g}, "
                f"worst mass excess {max(o.mass_excess for o in outs):.3g}")


def prey_only_global_run(U0, grid, t_end=200.0, delta=0.01, chi1="0.1 + 0.05*cos(2*pi*x)", chi2=0.1):
    """Run in the prey-only global-stability regime, tracking L1 between steps."""
    params = ModelParams(d1=2.0, K=1.0, mu1=1.0, e1=1.0, deltaX=delta, deltaY=delta, deltaZ=delta)
    model = Model.build(params, grid, TaxisSpec("saturated"), chi1=chi1, chi2=chi2)
    state = {"prev": lyapunov_L1(U0, params, grid), "worst": -math.inf}

    def hook(t, U):
        cur = lyapunov_L1(U, params, grid)
        state["worst"] = max(state["worst"], cur - state["prev"] - 1e-9 * (1 + cur))
        state["prev"] = cur

    res = simulate(model, U0, t_end, StepController(dt_max=0.5), diag_interval=10.0, on_step=hook)
    target = np.array([1.0, 0.0, 0.0])[:, None]
    dist = float(np.abs(res.state.reshape(3, -1) - target).max())
    return res, dist, state["worst"]


def check_lyapunov():
    grid = Grid.uniform(32)
    x = grid.centers[0]
    U0 = np.stack([0.5 + 0.3 * np.cos(np.pi * x), 0.8 + 0.2 * np.cos(2 * np.pi * x), 0.3 + 0.1 * np.cos(np.pi * x)])
    res, dist, worst = prey_only_global_run(U0, grid, t_end=40.0)
    ok = res.completed and worst <= 0
    return ok, f"worst L1 increase beyond slack {worst:.3g}, distance to (K,0,0) at T=40 {dist:.2e}"


SUITES = {
    "hoelder": check_hoelder,
    "sandwich": check_sandwich,
    "comparison": check_comparison,
    "operator_T": check_operator_T,
    "conservation": check_conservation,
    "convergence": check_convergence,
    "oracle": check_oracle,
    "positivity": check_positivity,
    "monitors": check_monitors,
    "lyapunov": check_lyapunov,
}


def run_suites(names):
    out = {}
    for name in names:
        if name not in SUITES:
            out[name] = (False, f"unknown suite; choose from {', '.join(SUITES)}")
            continue
        try:
            out[name] = SUITES[name]()
        except Exception as exc:  # a crashing suite is a failing suite
            out[name] = (False, f"raised {type(exc).__name__}: {exc}")
    return out
