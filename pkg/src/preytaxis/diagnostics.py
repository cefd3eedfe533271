"""Discrete norms, Lyapunov functionals, mass/energy quantities and monitors.

All integrals are cell-volume-weighted sums over the grid. Gradients are
taken on interior faces; boundary faces carry zero gradient.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import Grid, SampledCoefficient, face_gradients, laplacian, sample_coefficient
from .model import ModelParams, TaxisSpec
from .timenorms import TimeSeries, lp_eps_time_norm, lp_time_norm, operator_T, operator_T_series  # noqa: F401

CEILING_SLACK = 1e-8  # relative to K
MASS_SLACK = 1e-6
LYAPUNOV_FLOOR = 1e-13

SPECIES = ("X", "Y", "Z")


def _species(U):
    if hasattr(U, "as_array"):
        return U.as_array()
    return np.asarray(U, dtype=float)


# --------------------------------------------------------------------------
# spatial norms


def lp_norm(field, p, grid: Grid):
    """Volume-weighted discrete ``L^p`` norm, ``p`` in ``[1, inf]``."""
    f = np.abs(np.asarray(field, dtype=float))
    if p == math.inf:
        return float(f.max())
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    return float((np.sum(f**p) * grid.cell_volume) ** (1.0 / p))


def max_face_gradient(field, grid: Grid):
    grads = face_gradients(field, grid)
    if grid.n == 1:
        return float(np.abs(grads[0]).max(initial=0.0))
    # average the face gradients to cell centres to form |grad|
    comps = []
    for axis, g in enumerate(grads):
        padded = np.pad(g, [(1, 1) if a == axis else (0, 0) for a in range(grid.n)])
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        comps.append(0.5 * (padded[tuple(lo)] + padded[tuple(hi)]))
    mag = np.sqrt(sum(c**2 for c in comps))
    return float(max(mag.max(), *(np.abs(g).max(initial=0.0) for g in grads)))


def winf_seminorm(field, grid: Grid):
    """``W^{1,inf}`` surrogate: max cell value plus max face-gradient magnitude."""
    return float(np.abs(field).max()) + max_face_gradient(field, grid)


def w2inf_surrogate(field, grid: Grid):
    return winf_seminorm(field, grid) + float(np.abs(laplacian(field, grid)).max())


# --------------------------------------------------------------------------
# mass functional


def mass_functional(U, params: ModelParams, grid: Grid):
    X, Y, Z = _species(U)
    return float(np.sum(params.e1 * params.e2 * X + params.e2 * Y + Z) * grid.cell_volume)


def logistic_max(params: ModelParams, X_bar):
    """Maximum of ``r X (1 - X/K)`` over ``[0, X_bar]``."""
    X = min(X_bar, 0.5 * params.K)
    return params.r * X * (1.0 - X / params.K)


def prey_ceiling(params: ModelParams, X0):
    return max(float(np.max(X0)), params.K)


def mass_bound(params: ModelParams, U0, grid: Grid):
    """``max{M(0), e1 e2 (rbar / min(d1, d2) + Xbar) |Omega|}``."""
    X0 = _species(U0)[0]
    X_bar = prey_ceiling(params, X0)
    r_bar = logistic_max(params, X_bar)
    m = min(params.d1, params.d2)
    return max(mass_functional(U0, params, grid),
               params.e1 * params.e2 * (r_bar / m + X_bar) * grid.volume)


# --------------------------------------------------------------------------
# Lyapunov functionals


def _relative_entropy(u):
    """``u - 1 - ln u`` without cancellation near ``u = 1``."""
    d = u - 1.0
    return d - np.log1p(d)


def lyapunov_L1(U, params: ModelParams, grid: Grid):
    """Lyapunov functional centred on the prey-only state ``(K, 0, 0)``.

    Returns NaN when some prey cell lies below ``1e-13 K``.
    """
    X, Y, Z = _species(U)
    K = params.K
    if np.any(X < LYAPUNOV_FLOOR * K):
        return math.nan
    dens = K * _relative_entropy(X / K) + Y / params.e1 + Z / (params.e1 * params.e2)
    return float(np.sum(dens) * grid.cell_volume)


def lyapunov_L2(U, eq, params: ModelParams, tau1, grid: Grid):
    """Lyapunov functional centred on a semi-coexistence state ``(X*, Y*, 0)``.

    ``tau1`` is the constant handling time. NaN when ``X`` or ``Y`` has a cell
    below ``1e-13`` times its equilibrium value.
    """
    X, Y, Z = _species(U)
    Xs, Ys = float(eq[0]), float(eq[1])
    if not (Xs > 0 and Ys > 0):
        raise DomainError("L2 needs an equilibrium with positive X* and Y*")
    if np.any(X < LYAPUNOV_FLOOR * Xs) or np.any(Y < LYAPUNOV_FLOOR * Ys):
        return math.nan
    wx = Xs / (1.0 + tau1 * Xs)
    dens = (wx * _relative_entropy(X / Xs) + Ys / params.e1 * _relative_entropy(Y / Ys)
            + Z / (params.e1 * params.e2))
    return float(np.sum(dens) * grid.cell_volume)


def lyapunov_L3(U, eq, grid: Grid):
    U = _species(U)
    eq = np.asarray(eq, dtype=float).reshape((3,) + (1,) * grid.n)
    return float(0.5 * np.sum((U - eq) ** 2) * grid.cell_volume)


# --------------------------------------------------------------------------
# energy quantities


def _face_sum(values_per_face, grid: Grid):
    """Cell-volume integral of interior-face quantities.

    Each cell takes the mean of its two adjacent face values, and boundary
    cells take their single interior face value, so the end faces carry
    weight 1.5. This keeps the boundary half-cells in the integral.
    """
    total = 0.0
    for axis, v in enumerate(values_per_face):
        w = np.ones(v.shape[axis])
        if w.size:
            w[0] += 0.5
            w[-1] += 0.5
        shape = [1] * v.ndim
        shape[axis] = -1
        total += float(np.sum(v * w.reshape(shape)))
    return total * grid.cell_volume


def _face_means(field, grid: Grid):
    out = []
    for axis in range(grid.n):
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        out.append(0.5 * (field[tuple(lo)] + field[tuple(hi)]))
    return out


def gradient_energy(field, weight, grid: Grid):
    """``int |grad u|^2 / w`` with ``w`` averaged onto the faces."""
    w_faces = _face_means(np.asarray(weight, dtype=float), grid)
    if any(np.any(w <= 0) for w in w_faces):
        raise DomainError("gradient energy needs a positive denominator")
    grads = face_gradients(field, grid)
    return _face_sum([g**2 / w for g, w in zip(grads, w_faces)], grid)


def energy_EX(U, tau1, grid: Grid):
    """``int (|grad X|^2 / X + tau1 |grad X|^2)`` on interior faces."""
    X = _species(U)[0] if np.ndim(U) > grid.n else np.asarray(U, dtype=float)
    if np.any(X <= 0):
        raise DomainError("E_X needs a positive prey density")
    if not isinstance(tau1, SampledCoefficient):
        tau1 = sample_coefficient(tau1, grid)
    grads = face_gradients(X, grid)
    x_faces = _face_means(X, grid)
    terms = []
    for axis, (g, xf) in enumerate(zip(grads, x_faces)):
        sl = [slice(None)] * grid.n
        sl[axis] = slice(1, -1)
        t = tau1.faces[axis][tuple(sl)]
        terms.append(g**2 / xf + t * g**2)
    return _face_sum(terms, grid)


def initial_data_quantities(U0, spec: TaxisSpec, grid: Grid):
    """The four initial-data quantities whose bounds gate uniform estimates.

    Returns ``(int |grad X0|^2/X0, int |grad Y0|^2/Y0, int |grad Z0|^2/h(Z0),
    W^{2,inf} surrogate of U0)``.
    """
    X0, Y0, Z0 = _species(U0)
    w2 = max(w2inf_surrogate(u, grid) for u in (X0, Y0, Z0))
    return (
        gradient_energy(X0, X0, grid),
        gradient_energy(Y0, Y0, grid),
        gradient_energy(Z0, spec.h(Z0), grid),
        w2,
    )


# --------------------------------------------------------------------------
# monitors


@dataclass
class MonitorEvent:
    time: float
    monitor: str
    lhs: float
    rhs: float

    def to_json(self):
        return json.dumps({"time": self.time, "monitor": self.monitor, "lhs": self.lhs, "rhs": self.rhs})


class BoundMonitor:
    """Checks the prey ceiling, the mass bound and strict positivity.

    Violations are collected as :class:`MonitorEvent` records; nothing is
    raised.
    """

    def __init__(self, params: ModelParams, grid: Grid, U0):
        U0 = _species(U0)
        self.params = params
        self.grid = grid
        self.ceiling = prey_ceiling(params, U0[0]) + CEILING_SLACK * params.K
        self.mass_limit = mass_bound(params, U0, grid) + MASS_SLACK
        self.positive_species = [bool(np.all(u > 0)) for u in U0]
        self.events: list[MonitorEvent] = []
        self.counts = {"prey_ceiling": 0, "mass_bound": 0, "positivity": 0}

    def check(self, t, U):
        flags = []
        x_max = float(np.max(U[0]))
        if x_max > self.ceiling:
            flags.append(self._log(t, "prey_ceiling", x_max, self.ceiling))
        mass = mass_functional(U, self.params, self.grid)
        if mass > self.mass_limit:
            flags.append(self._log(t, "mass_bound", mass, self.mass_limit))
        for u, strict in zip(U, self.positive_species):
            low = float(np.min(u))
            if (strict and low <= 0) or low < 0:
                flags.append(self._log(t, "positivity", low, 0.0))
                break
        return flags

    def _log(self, t, name, lhs, rhs):
        self.events.append(MonitorEvent(float(t), name, float(lhs), float(rhs)))
        self.counts[name] += 1
        return name

    def summary(self):
        return {"ceiling": self.ceiling, "mass_limit": self.mass_limit, "violations": dict(self.counts)}


# --------------------------------------------------------------------------
# diagnostics series

def _columns():
    cols = ["t"]
    for s in SPECIES:
        cols += [f"L1_{s}", f"L2_{s}", f"Linf_{s}", f"W1inf_{s}"]
    return cols + ["mass", "lyap1", "lyap2", "lyap3", "EX", "flags"]


COLUMNS = tuple(_columns())


@dataclass
class LyapunovReference:
    """Equilibria the Lyapunov columns are centred on (``None`` = not applicable)."""

    semi: tuple | None = None
    target: tuple | None = None
    tau1: float = 0.0


@dataclass
class DiagnosticsSeries:
    rows: list = field(default_factory=list)

    def append(self, row):
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("diagnostic times must be strictly increasing")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def times(self):
        return self.column("t")

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(COLUMNS) + "\n")
        for row in self.rows:
            vals = []
            for c in COLUMNS:
                v = row[c]
                vals.append(v if isinstance(v, str) else f"{v:.17g}")
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def diagnostics_record(t, U, params: ModelParams, grid: Grid, tau1: SampledCoefficient,
                       reference: LyapunovReference | None = None, flags=()):
    U = _species(U)
    row = {"t": float(t)}
    for name, u in zip(SPECIES, U):
        row[f"L1_{name}"] = lp_norm(u, 1, grid)
        row[f"L2_{name}"] = lp_norm(u, 2, grid)
        row[f"Linf_{name}"] = lp_norm(u, math.inf, grid)
        row[f"W1inf_{name}"] = winf_seminorm(u, grid)
    row["mass"] = mass_functional(U, params, grid)
    row["lyap1"] = lyapunov_L1(U, params, grid)
    reference = reference or LyapunovReference()
    row["lyap2"] = lyapunov_L2(U, reference.semi, params, reference.tau1, grid) if reference.semi else math.nan
    row["lyap3"] = lyapunov_L3(U, reference.target, grid) if reference.target else math.nan
    row["EX"] = energy_EX(U[0], tau1, grid) if np.all(U[0] > 0) else math.nan
    row["flags"] = "|".join(sorted(set(flags)))
    return row
