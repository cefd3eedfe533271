"""Explicit time stepping of the semi-discrete system and the homogeneous ODE oracle.

The spatial system is advanced with Heun's method (explicit RK2). Its
embedded forward-Euler stage gives a first-order error estimate that drives
the step-size controller. Steps are rejected, never clamped, when they
would produce a nonpositive cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .diagnostics import BoundMonitor, DiagnosticsSeries, LyapunovReference, diagnostics_record
from .errors import AssumptionError, ConfigError, NumericError
from .grid import Grid, SampledCoefficient, State, laplacian, sample_coefficient, taxis_divergence
from .model import ModelParams, TaxisSpec, reaction

BLOWUP_MESSAGE = "possible finite-time blow-up or stiffness"


@dataclass(frozen=True)
class Model:
    """Everything the right-hand side needs, sampled once on the grid."""

    params: ModelParams
    grid: Grid
    spec: TaxisSpec
    chi1: SampledCoefficient
    chi2: SampledCoefficient
    tau1: SampledCoefficient
    tau2: SampledCoefficient
    upwind: bool = False

    @classmethod
    def build(cls, params, grid, spec, chi1=1.0, chi2=1.0, tau1=0.0, tau2=0.0, upwind=False):
        sampled = {k: sample_coefficient(v, grid) for k, v in
                   (("chi1", chi1), ("chi2", chi2), ("tau1", tau1), ("tau2", tau2))}
        for name in ("chi1", "chi2"):
            if not sampled[name].lower_bound > 0:
                raise AssumptionError("(A_χ)", f"{name} must be strictly positive, min sample {sampled[name].lower_bound:g}")
        for name in ("tau1", "tau2"):
            if sampled[name].lower_bound < 0:
                raise AssumptionError("(A_τ)", f"{name} must be nonnegative, min sample {sampled[name].lower_bound:g}")
        if spec.n != grid.n:
            raise ConfigError(f"taxis spec declared for n={spec.n} but the grid has n={grid.n}")
        return cls(params, grid, spec, upwind=upwind, **sampled)

    @property
    def tau_constant(self):
        return self.tau1.is_constant and self.tau2.is_constant

    def _tau(self, c):
        return c.value if c.is_constant else c.cells


def rhs(U, model: Model, with_taxis=True):
    """Semi-discrete tendency of the stacked state ``U`` of shape ``(3, *grid.shape)``."""
    p, grid = model.params, model.grid
    X, Y, Z = U
    fX, fY, fZ = reaction(X, Y, Z, p, model._tau(model.tau1), model._tau(model.tau2))
    lap = laplacian(U, grid)
    out = np.empty_like(U)
    out[0] = fX + p.deltaX * lap[0]
    out[1] = fY + p.deltaY * lap[1]
    out[2] = fZ + p.deltaZ * lap[2]
    if with_taxis:
        hY = np.asarray(model.spec.h(Y))
        hZ = np.asarray(model.spec.h(Z))
        out[1] -= taxis_divergence(X, Y, model.chi1, model.spec, grid, model.upwind, h_carrier=hY)
        out[2] -= taxis_divergence(Y, Z, model.chi2, model.spec, grid, model.upwind, h_carrier=hZ)
    return out


def dt_limit(U, model: Model, cfl):
    """Largest step allowed by the diffusive and taxis stability limits.

    Diffusion: ``max(delta) dt / dx^2 <= cfl / (2n)``. Taxis: the flux
    ``chi h(W) grad V`` moves ``W`` with speed ``chi h(W)/W |grad V|``, and
    the step must keep that drift within ``cfl / n`` cells.
    """
    grid, p = model.grid, model.params
    n = grid.n
    dx = min(grid.spacing)
    dt = cfl * dx * dx / (2 * n * float(p.diffusion.max()))
    for chi, V, W in ((model.chi1, U[0], U[1]), (model.chi2, U[1], U[2])):
        speed = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            hw = np.asarray(model.spec.h(np.maximum(W, 0.0)))
            ratio = np.where(W > 0, hw / W, 0.0)
        for axis, h in enumerate(grid.spacing):
            grad = np.abs(np.diff(V, axis=axis)) / h
            lo = np.take(ratio, range(0, ratio.shape[axis] - 1), axis=axis)
            hi = np.take(ratio, range(1, ratio.shape[axis]), axis=axis)
            speed = max(speed, float(np.max(np.maximum(lo, hi) * grad, initial=0.0)))
        speed *= chi.upper_bound
        if speed > 0:
            dt = min(dt, cfl * dx / (n * speed))
    return dt


def heun_step(U, dt, model: Model):
    """One fixed Heun step; returns ``(U_new, U_euler)``."""
    k1 = rhs(U, model)
    Ue = U + dt * k1
    k2 = rhs(Ue, model)
    return U + 0.5 * dt * (k1 + k2), Ue


@dataclass
class StepController:
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.1
    safety: float = 0.9
    cfl: float = 0.9
    tol: float = 1e-6
    max_growth: float = 2.0
    adaptive: bool = True
    accepted: int = 0
    positivity_rejections: int = 0
    error_rejections: int = 0

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigError(f"need 0 < dt_min <= dt_init <= dt_max, got {self.dt_min}, {self.dt_init}, {self.dt_max}")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"CFL must lie in (0, 1], got {self.cfl}")
        if not (0 < self.safety <= 1 and self.tol > 0 and self.max_growth >= 1):
            raise ConfigError("invalid safety, tol or max_growth")

    @property
    def rejections(self):
        return self.positivity_rejections + self.error_rejections

    def stats(self):
        return {"accepted": self.accepted, "positivity_rejections": self.positivity_rejections,
                "error_rejections": self.error_rejections}


class NonFiniteTendency(NumericError):
    pass


def _positive_ok(U_new, strict):
    """Every value nonnegative; species that were strictly positive stay so."""
    for u, s in zip(U_new, strict):
        low = u.min()
        if not low >= 0 or (s and low <= 0):
            return False
    return True


def step(U, dt, controller: StepController, model: Model, strict=None):
    """Attempt one Heun step of size ``dt``.

    Returns ``(U_new, dt_next, accepted)``. On rejection ``U_new`` is ``U``
    and ``dt_next = dt / 2``. Species that are identically zero may remain
    zero (they are invariant when ``h(0) = 0``); all others must stay
    strictly positive.
    """
    if strict is None:
        strict = [bool(np.all(u > 0)) for u in U]
    k1 = rhs(U, model)
    if not np.all(np.isfinite(k1)):
        raise NonFiniteTendency("non-finite tendency at an accepted state")
    Ue = U + dt * k1
    with np.errstate(invalid="ignore", over="ignore"):
        k2 = rhs(Ue, model)
        Un = U + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(Un)) or not _positive_ok(Un, strict):
        controller.positivity_rejections += 1
        return U, 0.5 * dt, False
    if not controller.adaptive:
        controller.accepted += 1
        return Un, dt, True
    err = float(np.max(np.abs(Un - Ue) / (controller.tol * (1.0 + np.abs(Un)))))
    if err > 1.0:
        controller.error_rejections += 1
        return U, 0.5 * dt, False
    factor = controller.max_growth if err == 0 else min(controller.max_growth, controller.safety * err**-0.5)
    controller.accepted += 1
    return Un, min(dt * max(factor, 0.2), controller.dt_max), True


@dataclass
class TrajectoryRecord:
    t: float
    state: np.ndarray | None


@dataclass
class SimulationResult:
    status: str
    message: str
    t_final: float
    state: np.ndarray
    trajectory: list = field(default_factory=list)
    diagnostics: DiagnosticsSeries = field(default_factory=DiagnosticsSeries)
    monitor: BoundMonitor | None = None
    controller: StepController | None = None

    @property
    def completed(self):
        return self.status == "completed"

    @property
    def snapshot_times(self):
        return [r.t for r in self.trajectory if r.state is not None]


def _record_times(interval, t_end):
    if interval is None or interval <= 0 or t_end <= 0:
        return []
    k = int(math.floor(t_end / interval + 1e-9))
    return [i * interval for i in range(1, k + 1) if i * interval < t_end * (1 - 1e-12)] + [t_end]


def simulate(model: Model, U0, t_end, controller: StepController | None = None, diag_interval=None,
             snap_interval=None, reference: LyapunovReference | None = None, on_step=None, monitor=True):
    """Integrate from ``t = 0`` to ``t_end``.

    Diagnostics are recorded at multiples of ``diag_interval`` (and always at
    ``0`` and ``t_end``), snapshots at multiples of ``snap_interval``. Steps
    are shortened to land exactly on record times. ``on_step(t, U)`` is called
    after every accepted step. The result's ``status`` is ``"completed"``,
    ``"dt_collapse"`` or ``"non_finite"``; failures keep the last good state.
    """
    controller = controller or StepController()
    U = np.array(U0.as_array() if isinstance(U0, State) else U0, dtype=float)
    if U.shape != (3,) + model.grid.shape:
        raise ConfigError(f"initial state has shape {U.shape}, expected {(3,) + model.grid.shape}")
    if np.any(U < 0) or not np.all(np.isfinite(U)):
        raise ConfigError("initial state must be finite and nonnegative")
    strict = [bool(np.all(u > 0)) for u in U]
    mon = BoundMonitor(model.params, model.grid, U) if monitor else None
    diag = DiagnosticsSeries()
    traj = []
    t_end = float(t_end)

    def record_diag(t, flags=()):
        diag.append(diagnostics_record(t, U, model.params, model.grid, model.tau1, reference, flags))

    record_diag(0.0)
    traj.append(TrajectoryRecord(0.0, U.copy()))
    diag_times = _record_times(diag_interval, t_end) if diag_interval else ([t_end] if t_end > 0 else [])
    snap_times = _record_times(snap_interval, t_end) if snap_interval else []
    stops = sorted(set(diag_times) | set(snap_times))
    diag_set, snap_set = set(diag_times), set(snap_times)

    t = 0.0
    dt = controller.dt_init
    status, message = "completed", ""
    pending_flags = set()
    for target in stops:
        while t < target:
            limit = min(dt_limit(U, model, controller.cfl), controller.dt_max)
            if limit < controller.dt_min:
                status = "dt_collapse"
                message = f"stable step {limit:.3g} below dt_min={controller.dt_min:g} at t={t:.6g}: {BLOWUP_MESSAGE}"
                break
            dt = min(dt, limit)
            remaining = target - t
            landing = dt >= remaining * (1 - 1e-12)
            h = remaining if landing else dt
            try:
                Un, dt_next, ok = step(U, h, controller, model, strict)
            except NonFiniteTendency as exc:
                status, message = "non_finite", f"{exc} at t={t:.6g}"
                break
            if not ok:
                dt = dt_next
                if dt < controller.dt_min:
                    status = "dt_collapse"
                    message = f"step size {dt:.3g} below dt_min={controller.dt_min:g} at t={t:.6g}: {BLOWUP_MESSAGE}"
                    break
                continue
            U = Un
            t = target if landing else t + h
            # a step shortened to hit a record time does not shrink the controller's proposal
            dt = max(dt, dt_next) if landing else dt_next
            if mon is not None:
                pending_flags.update(mon.check(t, U))
            if on_step is not None:
                on_step(t, U)
        if status != "completed":
            break
        if target in diag_set:
            record_diag(t, pending_flags)
            pending_flags = set()
        if target in snap_set:
            traj.append(TrajectoryRecord(t, U.copy()))
    if status != "completed" and diag.rows and diag.rows[-1]["t"] < t:
        record_diag(t, pending_flags | {status})
    return SimulationResult(status, message, t, U, traj, diag, mon, controller)


# --------------------------------------------------------------------------
# homogeneous oracle


def phi_vector(U, params: ModelParams, tau1=0.0, tau2=0.0):
    X, Y, Z = U
    return np.array(reaction(X, Y, Z, params, tau1, tau2), dtype=float)


@dataclass
class ODETrajectory:
    t: np.ndarray
    y: np.ndarray
    sol: object

    def __call__(self, t):
        return self.sol(t)

    @property
    def final(self):
        return self.y[:, -1]


def homogeneous_ode_integrate(params: ModelParams, U0, T, tol=1e-10, tau1=0.0, tau2=0.0):
    """Integrate ``dU/dt = Phi(U)`` with an 8th-order Dormand-Prince pair.

    ``tol`` is the relative tolerance; the absolute tolerance is
    ``tol * 1e-3``. Returns a dense trajectory.
    """
    for name, tau in (("tau1", tau1), ("tau2", tau2)):
        if isinstance(tau, (SampledCoefficient,)) or not np.isscalar(tau):
            raise ConfigError(f"{name} must be a constant for the homogeneous reduction")
        if tau < 0:
            raise AssumptionError("(A_τ)", f"{name}={tau} must be nonnegative")
    U0 = np.asarray(U0, dtype=float)
    if np.any(U0 < 0):
        raise ConfigError("U0 must be nonnegative")
    sol = solve_ivp(lambda _t, u: phi_vector(u, params, tau1, tau2), (0.0, float(T)), U0, method="DOP853",
                    rtol=tol, atol=tol * 1e-3, dense_output=True)
    if not sol.success:
        raise NumericError(f"ODE oracle failed: {sol.message}")
    return ODETrajectory(sol.t, sol.y, sol.sol)
