"""Uniform cell-centred grids with zero-flux boundaries and flux-form operators.

Fields are plain numpy arrays of shape ``grid.shape``. Both operators are
written as differences of face fluxes, with the boundary faces carrying zero
flux, so cell-volume-weighted sums of their outputs vanish up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DomainError
from .model import CoefficientField, TaxisSpec

MIN_CELLS = 4


@dataclass(frozen=True)
class Grid:
    """Rectangle ``[0, L_1] x ... x [0, L_n]`` split into equal cells."""

    extents: tuple
    counts: tuple

    def __post_init__(self):
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(extents) != len(counts):
            raise ConfigError("extents and counts must have the same length")
        if len(counts) not in (1, 2):
            raise ConfigError(f"only n in {{1, 2}} supported, got n={len(counts)}")
        if any(c < MIN_CELLS for c in counts):
            raise ConfigError(f"need at least {MIN_CELLS} cells per axis, got {counts}")
        if any(not e > 0 for e in extents):
            raise ConfigError(f"extents must be positive, got {extents}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, n_cells, length=1.0, dim=1):
        return cls((length,) * dim, (n_cells,) * dim)

    @property
    def n(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.counts

    @property
    def size(self):
        return int(np.prod(self.counts))

    @cached_property
    def spacing(self):
        return tuple(e / c for e, c in zip(self.extents, self.counts))

    @cached_property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.extents))

    @property
    def centers(self):
        return tuple((np.arange(c) + 0.5) * h for c, h in zip(self.counts, self.spacing))

    def faces(self, axis):
        """Face coordinates normal to ``axis`` (boundary faces included)."""
        c, h = self.counts[axis], self.spacing[axis]
        return np.arange(c + 1) * h

    def mesh(self):
        """Cell-centre coordinate arrays, each of shape ``self.shape``."""
        return np.meshgrid(*self.centers, indexing="ij")

    def face_mesh(self, axis):
        axes = list(self.centers)
        axes[axis] = self.faces(axis)
        return np.meshgrid(*axes, indexing="ij")

    def reflect(self, field, axis=0):
        return np.flip(field, axis=axis)


@dataclass
class State:
    """Species densities ``X, Y, Z`` on a shared grid at time ``t``."""

    grid: Grid
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in "XYZ":
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape == ():
                arr = np.full(self.grid.shape, float(arr))
            if arr.shape != self.grid.shape:
                raise ConfigError(f"field {name} has shape {arr.shape}, grid is {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"field {name} has non-finite values")
            setattr(self, name, arr)

    @classmethod
    def from_array(cls, grid, U, t=0.0):
        return cls(grid, U[0], U[1], U[2], t)

    @classmethod
    def homogeneous(cls, grid, values, t=0.0):
        return cls(grid, *(np.full(grid.shape, float(v)) for v in values), t=t)

    def as_array(self):
        return np.stack([self.X, self.Y, self.Z])

    def is_positive(self):
        return bool(np.all(self.X > 0) and np.all(self.Y > 0) and np.all(self.Z > 0))


# --------------------------------------------------------------------------
# operators


def _divergence(fluxes, spacing, lead=0):
    """Difference interior-face fluxes; the zero boundary fluxes are implicit."""
    out = None
    for axis, (flux, h) in enumerate(zip(fluxes, spacing)):
        ax = axis + lead
        if out is None:
            shape = list(flux.shape)
            shape[ax] += 1
            out = np.zeros(shape)
        lo, hi = _axis_slices(out.ndim, ax)
        f = flux / h
        out[lo] += f
        out[hi] -= f
    return out


def laplacian(field, grid: Grid):
    """Second-order flux-form Laplacian with zero normal flux.

    ``field`` may carry leading axes (e.g. a stack of species); the grid axes
    are the trailing ones.
    """
    field = np.asarray(field, dtype=float)
    lead = field.ndim - grid.n
    fluxes = [np.diff(field, axis=a + lead) / h for a, h in enumerate(grid.spacing)]
    return _divergence(fluxes, grid.spacing, lead)


@dataclass(frozen=True)
class SampledCoefficient:
    """A coefficient sampled at cell centres and at every face family."""

    cells: np.ndarray
    faces: tuple
    lower_bound: float
    upper_bound: float
    is_constant: bool

    @property
    def is_zero(self):
        return self.is_constant and self.upper_bound == 0.0

    @property
    def value(self):
        """The constant value; only meaningful when ``is_constant``."""
        return self.upper_bound


def sample_coefficient(coeff, grid: Grid) -> SampledCoefficient:
    """Sample ``coeff`` at cell centres and faces and cache its extrema.

    Closed-form fields are evaluated exactly at face midpoints; tabulated
    fields use the mean of the two adjacent cell values (the boundary cell
    value on boundary faces).
    """
    coeff = CoefficientField.coerce(coeff)
    if coeff.kind == "tabulated" and coeff.grid == grid:
        cells = np.array(coeff.values, dtype=float)
        faces = []
        for axis in range(grid.n):
            inner = 0.5 * (np.take(cells, range(1, cells.shape[axis]), axis=axis)
                           + np.take(cells, range(0, cells.shape[axis] - 1), axis=axis))
            first = np.take(cells, [0], axis=axis)
            last = np.take(cells, [-1], axis=axis)
            faces.append(np.concatenate([first, inner, last], axis=axis))
    else:
        cells = np.asarray(coeff(*grid.mesh()), dtype=float) * np.ones(grid.shape)
        faces = [np.asarray(coeff(*grid.face_mesh(a)), dtype=float) * np.ones(grid.face_mesh(a)[0].shape)
                 for a in range(grid.n)]
    samples = [cells, *faces]
    if not all(np.all(np.isfinite(s)) for s in samples):
        raise ConfigError(f"coefficient {coeff.describe()!r} has non-finite samples on the grid")
    lower = float(min(s.min() for s in samples))
    upper = float(max(s.max() for s in samples))
    for s in samples:
        s.setflags(write=False)
    return SampledCoefficient(cells, tuple(faces), lower, upper, coeff.is_constant)


def _axis_slices(ndim, axis):
    lo = [slice(None)] * ndim
    hi = [slice(None)] * ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def _interior_faces(face_values, axis):
    sl = [slice(None)] * face_values.ndim
    sl[axis] = slice(1, -1)
    return face_values[tuple(sl)]


def taxis_divergence(carried, carrier, chi: SampledCoefficient, spec: TaxisSpec, grid: Grid,
                     upwind=False, h_carrier=None):
    """Discrete ``div(chi(x) h(W) grad V)`` with ``V = carried``, ``W = carrier``.

    The face flux is ``chi_face * h_face * (V_R - V_L) / dx`` where
    ``h_face`` is the arithmetic mean of ``h(W)`` in the two adjacent cells
    (or the upwind cell value when ``upwind`` is set). Boundary faces carry
    no flux. ``h_carrier`` may pass a precomputed ``h(W)``.
    """
    V = np.asarray(carried, dtype=float)
    if h_carrier is None:
        W = np.asarray(carrier, dtype=float)
        if np.any(W < 0):
            raise DomainError("carrier density must be nonnegative")
        hW = np.asarray(spec.h(W))
    else:
        hW = h_carrier
    fluxes = []
    for axis, h in enumerate(grid.spacing):
        lo, hi = _axis_slices(V.ndim, axis)
        grad = (V[hi] - V[lo]) / h
        if upwind:
            # the carrier drifts up grad V, so the upwind cell is the lower one when grad > 0
            h_face = np.where(grad > 0, hW[lo], hW[hi])
        else:
            h_face = 0.5 * (hW[lo] + hW[hi])
        fluxes.append(_interior_faces(chi.faces[axis], axis) * h_face * grad)
    return _divergence(fluxes, grid.spacing)


def face_gradients(field, grid: Grid):
    """Interior-face gradients, one array per axis."""
    field = np.asarray(field, dtype=float)
    return [np.diff(field, axis=a) / h for a, h in enumerate(grid.spacing)]


def integrate_cells(field, grid: Grid):
    return float(np.sum(field)) * grid.cell_volume


# --------------------------------------------------------------------------
# snapshot I/O


def snapshot_header(grid: Grid):
    return ("x," if grid.n == 1 else "x,y,") + "X,Y,Z"


def write_snapshot(path, state: State):
    """CSV with one row per cell in row-major order, 17 significant digits."""
    grid = state.grid
    coords = [c.ravel() for c in grid.mesh()]
    cols = np.column_stack(coords + [state.X.ravel(), state.Y.ravel(), state.Z.ravel()])
    with open(path, "w", newline="") as fh:
        fh.write(snapshot_header(grid) + "\n")
        for row in cols:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_snapshot(path, grid: Grid, t=0.0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    k = grid.n
    if data.shape != (grid.size, k + 3):
        raise ConfigError(f"snapshot {path} does not match grid {grid.shape}")
    fields = [data[:, k + i].reshape(grid.shape) for i in range(3)]
    return State(grid, *fields, t=t)
