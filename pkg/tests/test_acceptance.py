"""Acceptance criteria, each at its stated tolerance and runtime budget."""

import math
import time

import numpy as np
import pytest

from preytaxis.analysis import classify, compute_equilibria, eigenvalues_3x3, jacobian_phi
from preytaxis.checks import (
    check_comparison, check_hoelder, check_sandwich, prey_only_global_run, randomized_cases, run_case,
    spatial_orders, temporal_orders,
)
from preytaxis.grid import Grid
from preytaxis.integrator import Model, StepController, homogeneous_ode_integrate, rhs, simulate
from preytaxis.model import ModelParams, TaxisSpec
from preytaxis.timenorms import TimeSeries, operator_T

P1 = ModelParams()


@pytest.fixture(scope="module")
def suite_outcomes():
    start = time.perf_counter()
    outs = [run_case(c) for c in randomized_cases(10, t_end=20.0)]
    return outs, time.perf_counter() - start


def test_criterion_1_homogeneous_reduction(report):
    start = time.perf_counter()
    params = P1.replace(deltaX=0.01, deltaY=0.01, deltaZ=0.01)
    grid = Grid.uniform(64)
    model = Model.build(params, grid, TaxisSpec("saturated"), chi1="2 + sin(2*pi*x)")
    res = simulate(model, np.full((3, 64), 0.5), 10.0, StepController(tol=1e-7))
    ode = homogeneous_ode_integrate(params, [0.5, 0.5, 0.5], 10.0).final
    err = float(np.abs(res.state - ode[:, None]).max())
    elapsed = time.perf_counter() - start
    report(1, res.completed and err <= 1e-6 and elapsed <= 10.0,
           f"sup deviation {err:.2e} (<= 1e-6), {elapsed:.1f} s (<= 10 s)")


def test_criterion_2_positivity(report, suite_outcomes):
    outs, elapsed = suite_outcomes
    bad = sum(o.nonpositive_states for o in outs)
    states = sum(o.accepted for o in outs)
    done = all(o.status == "completed" for o in outs)
    report(2, done and bad == 0 and elapsed <= 120.0,
           f"{len(outs)} configs, {states} accepted states, {bad} nonpositive, {elapsed:.1f} s (<= 120 s)")


def test_criterion_3_prey_ceiling(report, suite_outcomes):
    outs, _ = suite_outcomes
    worst = max(o.ceiling_excess for o in outs)
    report(3, worst <= 0, f"worst max X - (max(max X0, K) + 1e-8 K) = {worst:.3g}")


def test_criterion_4_mass_bound(report, suite_outcomes):
    outs, _ = suite_outcomes
    worst = max(o.mass_excess for o in outs)
    report(4, worst <= 0, f"worst M - (bound + 1e-6) = {worst:.3g}")


def test_criterion_5_prey_only_global_stability(report):
    grid = Grid.uniform(64)
    (x,) = grid.centers
    ics = [
        (0.5 + 0.3 * np.cos(np.pi * x), 0.8 + 0.2 * np.cos(2 * np.pi * x), 0.3 + 0.1 * np.cos(np.pi * x)),
        (1.5 + 0.4 * np.cos(3 * np.pi * x), 0.2 + 0.1 * np.cos(np.pi * x), 1.0 + 0.5 * np.cos(2 * np.pi * x)),
        (0.1 + 0.05 * np.cos(2 * np.pi * x), 2.0 + np.cos(np.pi * x), 0.05 + 0.02 * np.cos(3 * np.pi * x)),
    ]
    dists, increases, done = [], [], True
    for ic in ics:
        res, dist, worst = prey_only_global_run(np.stack(ic), grid, t_end=200.0)
        done &= res.completed
        dists.append(dist)
        increases.append(worst)
    ok = done and max(dists) <= 1e-3 and max(increases) <= 0
    report(5, ok, f"final distances {[f'{d:.1e}' for d in dists]} (<= 1e-3), "
                  f"worst L1 increase beyond slack {max(increases):.2e} (<= 0)")


def test_criterion_6_prey_only_instability(report):
    grid = Grid.uniform(16)
    eq = np.array([1.0, 0.0, 0.0])
    U0 = (eq + np.array([-1e-3, 1e-3, 0.0]))[:, None] * np.ones(grid.shape)
    model = Model.build(P1.replace(deltaX=0.05, deltaY=0.05, deltaZ=0.05), grid, TaxisSpec("saturated"))
    d0 = float(np.abs(U0 - eq[:, None]).max())
    growth = {"max": 0.0, "t": math.nan}

    def hook(t, U):
        d = float(np.abs(U - eq[:, None]).max())
        if d > growth["max"]:
            growth["max"], growth["t"] = d, t

    res = simulate(model, U0, 50.0, on_step=hook)
    ratio = growth["max"] / d0
    report(6, res.completed and ratio >= 10, f"sup distance grew {ratio:.0f}x (>= 10x) by t = {growth['t']:.1f}")


def test_criterion_7_eigenvalues_and_verdict(report):
    J = jacobian_phi((1.0, 0.0, 0.0), P1)
    ev = sorted(eigenvalues_3x3(J), key=lambda z: z.real)
    err = max(abs(a - b) for a, b in zip(ev, (-1.0, -0.25, 0.5)))
    prey = [e for e in compute_equilibria(P1) if e.kind == "prey_only"][0]
    verdict = classify(prey, P1).verdict
    report(7, err <= 1e-10 and verdict == "unstable", f"eigenvalue error {err:.1e} (<= 1e-10), verdict {verdict}")


def test_criterion_8_coexistence_taxis_condition(report):
    eq = [e for e in compute_equilibria(P1) if e.kind == "coexistence_1"][0]
    got = {}
    for c in (0.5, 1.4, 1.5):
        cond = classify(eq, P1, spec=TaxisSpec("constant", c=c)).condition("coexistence_a_taxis")
        got[c] = (cond.satisfied, cond.lhs)
    ok = [got[c][0] for c in (0.5, 1.4, 1.5)] == [True, True, False] and got[1.4][1] == pytest.approx(3.92)
    report(8, ok, ", ".join(f"c={c}: lhs {v[1]:.2f} -> {v[0]}" for c, v in got.items()))


def test_criterion_9_weighted_norms(report):
    results = {name: f(count=100) for name, f in
               (("hoelder", check_hoelder), ("sandwich", check_sandwich), ("comparison", check_comparison))}
    ones = TimeSeries(np.linspace(0.0, 40.0, 401), np.ones(401))
    val = operator_T(ones, 0.5, 1.0, 40.0)
    t_err = abs(val - (1 + math.sqrt(math.pi)))
    ok = all(r[0] for r in results.values()) and t_err <= 1e-4
    report(9, ok, "; ".join(f"{k}: {v[1]}" for k, v in results.items()) + f"; |T(1)(40) - (1+sqrt(pi))| = {t_err:.1e}")


def _full_rhs_spatial_orders(levels=(32, 64, 128, 256)):
    """Manufactured check of the assembled tendency against the continuous one."""
    params = ModelParams(deltaX=0.3, deltaY=0.2, deltaZ=0.1)
    spec = TaxisSpec("saturated")
    errs = []
    for n in levels:
        grid = Grid.uniform(n)
        x = grid.centers[0]
        model = Model.build(params, grid, spec, chi1="2 + sin(2*pi*x)", chi2=1.5, tau1=0.5)
        c = np.pi
        X, Xx, Xxx = 0.6 + 0.2 * np.cos(c * x), -0.2 * c * np.sin(c * x), -0.2 * c * c * np.cos(c * x)
        Y, Yx, Yxx = 0.5 + 0.1 * np.cos(2 * c * x), -0.2 * c * np.sin(2 * c * x), -0.4 * c * c * np.cos(2 * c * x)
        Z, Zx, Zxx = 0.4 + 0.1 * np.cos(c * x), -0.1 * c * np.sin(c * x), -0.1 * c * c * np.cos(c * x)
        chi1, dchi1 = 2 + np.sin(2 * c * x), 2 * c * np.cos(2 * c * x)

        def taxis(chi, dchi, W, Wx, Vx, Vxx):
            return dchi * spec.h(W) * Vx + chi * spec.h_prime(W) * Wx * Vx + chi * spec.h(W) * Vxx

        f = X * Y / (1 + 0.5 * X)
        g = Y * Z
        exact = np.stack([
            X * (1 - X) - f + params.deltaX * Xxx,
            f - g - params.d1 * Y - taxis(chi1, 0.0 * x + dchi1, Y, Yx, Xx, Xxx) + params.deltaY * Yxx,
            g - params.d2 * Z - taxis(1.5, 0.0, Z, Zx, Yx, Yxx) + params.deltaZ * Zxx,
        ])
        errs.append(float(np.abs(rhs(np.stack([X, Y, Z]), model) - exact).max()))
    e = np.array(errs)
    return np.log2(e[:-1] / e[1:])


def test_criterion_10_convergence_orders(report):
    start = time.perf_counter()
    lap, tax, _, _ = spatial_orders()
    full = _full_rhs_spatial_orders()
    tim, _ = temporal_orders()
    elapsed = time.perf_counter() - start
    orders = {"laplacian": lap, "taxis": tax, "full tendency (space)": full, "stepper (time)": tim}
    ok = all(np.all((o >= 1.8) & (o <= 2.2)) for o in orders.values()) and elapsed <= 300
    report(10, ok, "; ".join(f"{k} {np.round(v, 3).tolist()}" for k, v in orders.items()) + f"; {elapsed:.1f} s")


def test_criterion_11_derived_functions(report):
    lin = TaxisSpec("linear")
    exact = (lin.H(math.e), lin.calH(1.0), lin.Htilde(4.0))
    sat = TaxisSpec("saturated", eps=1.0, m=1.0)
    zs = np.logspace(-3, 3, 100)
    worst = max(abs(sat.H(z) - sat.H(z, method="quadrature")) for z in zs)
    ok = exact == (1.0, 1.0, 4.0) and worst <= 1e-9
    report(11, ok, f"h=z: H(e), calH(1), Htilde(4) = {exact}; saturated quadrature vs closed form {worst:.1e} (<= 1e-9)")
