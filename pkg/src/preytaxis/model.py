"""Model constants, spatial coefficients, reaction terms and the taxis family.

The reaction part of the three-level food chain is

    r(X) = r X (1 - X/K)
    f(X, Y, x) = mu1 X Y / (1 + tau1(x) X)
    g(Y, Z, x) = mu2 Y Z / (1 + tau2(x) Y)

and the taxis flux of species ``W`` up the gradient of ``V`` is weighted by
``chi(x) h(W)``. :class:`TaxisSpec` bundles ``h`` with the derived integrals

    H(z)      = int_1^z ds / h(s)
    calH(z)   = int_1^z H(s) ds + 1
    Htilde(z) = int_0^z h(s)^(-1/2) ds
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .errors import AssumptionError, ConfigError, DomainError, NumericError
from .expr import Expression
from .quadrature import adaptive_simpson

QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 60
# H is rejected below this argument when h ~ z^beta with beta >= 1 at 0.
H_SINGULAR_FLOOR = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """Scalar constants of the model; all must be strictly positive."""

    r: float = 1.0
    K: float = 1.0
    e1: float = 1.0
    e2: float = 1.0
    d1: float = 0.5
    d2: float = 0.25
    mu1: float = 1.0
    mu2: float = 1.0
    deltaX: float = 1.0
    deltaY: float = 1.0
    deltaZ: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise AssumptionError("(A_C)", f"{f.name}={value!r} is not a number") from None
            if not math.isfinite(value) or value <= 0.0:
                raise AssumptionError("(A_C)", f"{f.name}={value!r} must be a positive constant")
            object.__setattr__(self, f.name, value)

    @property
    def diffusion(self):
        return np.array([self.deltaX, self.deltaY, self.deltaZ])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# spatial coefficients


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """A scalar function of position.

    ``kind`` is ``"constant"``, ``"expression"`` (closed form in ``x``/``y``)
    or ``"tabulated"`` (values at the cell centres of a grid). Extrema are
    computed when the field is sampled on a grid, see
    :func:`preytaxis.grid.sample_coefficient`.
    """

    kind: str
    value: float | None = None
    expression: Expression | None = None
    values: np.ndarray | None = None
    grid: object = None

    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def from_expression(cls, source):
        return cls("expression", expression=Expression(source))

    @classmethod
    def tabulated(cls, values, grid):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ConfigError(f"tabulated coefficient has shape {values.shape}, grid is {grid.shape}")
        values.setflags(write=False)
        return cls("tabulated", values=values, grid=grid)

    @classmethod
    def coerce(cls, spec):
        """Build from a number, an expression string or an existing field."""
        if isinstance(spec, CoefficientField):
            return spec
        if isinstance(spec, str):
            try:
                return cls.constant(float(spec))
            except ValueError:
                return cls.from_expression(spec)
        return cls.constant(spec)

    @property
    def is_constant(self):
        return self.kind == "constant"

    def __call__(self, x, y=None):
        if self.kind == "constant":
            shape = np.broadcast(np.asarray(x), np.asarray(0.0 if y is None else y)).shape
            return self.value if shape == () else np.full(shape, self.value)
        if self.kind == "expression":
            return self.expression(x, y)
        return self._interpolate(x, y)

    def _interpolate(self, x, y):
        from scipy.interpolate import RegularGridInterpolator

        centers = self.grid.centers
        if self.grid.n == 1:
            return np.interp(x, centers[0], self.values)
        interp = RegularGridInterpolator(centers, self.values, bounds_error=False, fill_value=None)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return interp(pts).reshape(x.shape)

    def describe(self):
        if self.kind == "constant":
            return self.value
        if self.kind == "expression":
            return self.expression.source
        return "<tabulated>"

    def __eq__(self, other):
        if not isinstance(other, CoefficientField) or other.kind != self.kind:
            return False
        if self.kind == "tabulated":
            return np.array_equal(self.values, other.values) and self.grid == other.grid
        return self.value == other.value and self.expression == other.expression

    def __hash__(self):
        return hash((self.kind, self.value, self.expression))


def _coefficient_values(coeff, x):
    if isinstance(coeff, CoefficientField):
        return coeff(x)
    return coeff


# --------------------------------------------------------------------------
# reaction terms


def _check_nonnegative(name, value):
    arr = np.asarray(value)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} must be nonnegative")


def eval_r(X, params: ModelParams):
    """Logistic growth ``r X (1 - X/K)``."""
    _check_nonnegative("X", X)
    return params.r * X * (1.0 - X / params.K)


def eval_f(X, Y, x, params: ModelParams, tau1=0.0):
    """Holling II predation of consumers on producers."""
    _check_nonnegative("X", X)
    _check_nonnegative("Y", Y)
    t = _coefficient_values(tau1, x)
    return params.mu1 * X * Y / (1.0 + t * X)


def eval_g(Y, Z, x, params: ModelParams, tau2=0.0):
    """Holling II predation of predators on consumers."""
    _check_nonnegative("Y", Y)
    _check_nonnegative("Z", Z)
    t = _coefficient_values(tau2, x)
    return params.mu2 * Y * Z / (1.0 + t * Y)


def reaction(X, Y, Z, params: ModelParams, tau1, tau2):
    """Unchecked reaction vector; ``tau1``/``tau2`` are numbers or arrays."""
    f = params.mu1 * X * Y / (1.0 + tau1 * X)
    g = params.mu2 * Y * Z / (1.0 + tau2 * Y)
    return (
        params.r * X * (1.0 - X / params.K) - f,
        params.e1 * f - g - params.d1 * Y,
        params.e2 * g - params.d2 * Z,
    )


def eval_phi(U, x, params: ModelParams, tau1=0.0, tau2=0.0):
    """Reaction vector at state ``U = (X, Y, Z)`` and position ``x``.

    Returns an array whose first axis indexes the species.
    """
    X, Y, Z = (np.asarray(u, dtype=float) for u in U)
    for name, v in zip("XYZ", (X, Y, Z)):
        _check_nonnegative(name, v)
    t1 = _coefficient_values(tau1, x)
    t2 = _coefficient_values(tau2, x)
    return np.array(reaction(X, Y, Z, params, t1, t2))


# --------------------------------------------------------------------------
# taxis sensitivity family

FAMILIES = ("constant", "linear", "saturated", "ricker", "tabulated")

_RATIO_WINDOW = np.logspace(3, 6, 31)
_MAX_RATIO_SLOPE = 0.05


@dataclass(frozen=True)
class TaxisSpec:
    """Taxis sensitivity ``h`` with its asymptotic exponents.

    Families
    --------
    constant   h(z) = c
    linear     h(z) = c z
    saturated  h(z) = z / (1 + eps z^m)
    ricker     h(z) = z exp(-eps z)
    tabulated  monotone cubic (PCHIP) through ``(table_z, table_h)``; beyond
               the last node it continues as ``h_last (z / z_last)^alpha``.

    ``alpha`` (growth exponent at infinity) and ``beta`` (exponent at zero)
    default to the family's values. ``n`` is the spatial dimension the
    exponent constraints are checked against, and ``z_range`` is the upper
    end of the density range on which ``h' >= 0`` is verified.
    """

    family: str
    c: float = 1.0
    eps: float = 1.0
    m: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    n: int = 1
    z_range: float | None = None
    table_z: tuple = ()
    table_h: tuple = ()
    _pchip: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown taxis family {self.family!r}; expected one of {FAMILIES}")
        for name in ("c", "eps", "m"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.family == "tabulated":
            z = np.asarray(self.table_z, dtype=float)
            h = np.asarray(self.table_h, dtype=float)
            if z.ndim != 1 or z.size < 2 or z.shape != h.shape:
                raise ConfigError("tabulated h needs matching 1-D tables with at least two nodes")
            if z[0] != 0.0 or np.any(np.diff(z) <= 0):
                raise ConfigError("tabulated h must start at z=0 with strictly increasing nodes")
            if np.any(h < 0) or np.any(np.diff(h) < 0):
                raise AssumptionError("(A_h)", "tabulated h must be nonnegative and nondecreasing")
            object.__setattr__(self, "table_z", tuple(z.tolist()))
            object.__setattr__(self, "table_h", tuple(h.tolist()))
            object.__setattr__(self, "_pchip", PchipInterpolator(z, h, extrapolate=False))
        defaults = {
            "constant": (0.0, 0.0),
            "linear": (1.0, 1.0),
            "saturated": (1.0 - self.m, 1.0),
            "ricker": (0.0, 1.0),
            "tabulated": (None, 1.0),
        }[self.family]
        if self.alpha is None:
            if defaults[0] is None:
                raise ConfigError("tabulated h requires a declared alpha")
            object.__setattr__(self, "alpha", defaults[0])
        if self.beta is None:
            object.__setattr__(self, "beta", defaults[1])
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "n", int(self.n))
        if self.z_range is None:
            zr = 1.0 / self.eps if self.family == "ricker" else 1e6
            object.__setattr__(self, "z_range", zr)
        object.__setattr__(self, "z_range", float(self.z_range))
        self._validate()

    # -- validation -------------------------------------------------------

    def _validate(self):
        n = self.n
        if n < 1:
            raise ConfigError(f"spatial dimension must be >= 1, got {n}")
        fam = self.family
        if fam in ("constant", "linear") and not self.c > 0:
            raise AssumptionError("(A_h)", f"{fam} family needs c > 0, got {self.c}")
        if fam in ("saturated", "ricker") and not self.eps > 0:
            raise AssumptionError("(A_h)", f"{fam} family needs eps > 0, got {self.eps}")
        if fam == "saturated":
            m_min = max((n - 2) / (n + 2), 0.0)
            if not self.m > m_min:
                raise AssumptionError("(A_h)", f"saturated family needs m > {m_min:g} for n={n}, got {self.m}")
        if fam != "constant" and not (1.0 <= self.beta < 2.0):
            raise AssumptionError("(A_h)", f"beta={self.beta} outside [1, 2)")
        alpha_max = min(4.0 / (n + 2), 1.0)
        alpha_ok = 0.0 <= self.alpha <= 1.0 and self.alpha < 4.0 / (n + 2)
        if not alpha_ok:
            raise AssumptionError(
                "(A_h)", f"alpha={self.alpha} outside [0, 4/(n+2)) ∩ [0, 1] for n={n} (max {alpha_max:g})"
            )
        zs = np.concatenate([[0.0], np.logspace(-8, math.log10(self.z_range), 400)])
        hs = self.h(zs)
        dhs = self.h_prime(zs)
        if not np.all(np.isfinite(hs)) or np.any(hs < 0):
            raise AssumptionError("(A_h)", "h must map [0, inf) into [0, inf)")
        negative = dhs < -1e-12 * max(1.0, float(np.max(np.abs(dhs))))
        if np.any(negative):
            bad = zs[np.argmax(negative)]
            raise AssumptionError("(A_h)", f"h' < 0 at z={bad:.6g} inside the declared range [0, {self.z_range:g}]")
        if fam != "ricker":
            ratio = self.h(_RATIO_WINDOW) / _RATIO_WINDOW**self.alpha
            if not (np.all(np.isfinite(ratio)) and np.all(ratio > 0)):
                raise AssumptionError("(A_h)", "h(z)/z^alpha is not positive and finite for large z")
            slope = np.log(ratio[-1] / ratio[0]) / np.log(_RATIO_WINDOW[-1] / _RATIO_WINDOW[0])
            if abs(slope) > _MAX_RATIO_SLOPE:
                raise AssumptionError(
                    "(A_h)", f"declared alpha={self.alpha} inconsistent with h (residual log-slope {slope:.3g})"
                )

    # -- h and h' ----------------------------------------------------------

    def h(self, z):
        z = np.asarray(z, dtype=float)
        fam = self.family
        if fam == "constant":
            out = np.full_like(z, self.c)
        elif fam == "linear":
            out = self.c * z
        elif fam == "saturated":
            out = z / (1.0 + self.eps * z**self.m)
        elif fam == "ricker":
            out = z * np.exp(-self.eps * z)
        else:
            out = self._tabulated(z)
        return out.item() if out.ndim == 0 else out

    def h_prime(self, z):
        z = np.asarray(z, dtype=float)
        fam = self.family
        if fam == "constant":
            out = np.zeros_like(z)
        elif fam == "linear":
            out = np.full_like(z, self.c)
        elif fam == "saturated":
            zm = z**self.m
            out = (1.0 + self.eps * (1.0 - self.m) * zm) / (1.0 + self.eps * zm) ** 2
        elif fam == "ricker":
            out = np.exp(-self.eps * z) * (1.0 - self.eps * z)
        else:
            out = self._tabulated(z, derivative=True)
        return out.item() if out.ndim == 0 else out

    def _tabulated(self, z, derivative=False):
        z_last, h_last = self.table_z[-1], self.table_h[-1]
        inside = z <= z_last
        out = np.empty_like(z)
        zi = z[inside]
        if derivative:
            out[inside] = np.maximum(self._pchip(zi, 1), 0.0)
            zo = z[~inside]
            out[~inside] = self.alpha * h_last * zo ** (self.alpha - 1.0) / z_last**self.alpha
        else:
            out[inside] = self._pchip(zi)
            out[~inside] = h_last * (z[~inside] / z_last) ** self.alpha
        return out

    # -- derived functions ------------------------------------------------

    @property
    def has_closed_forms(self):
        return self.family != "tabulated"

    def _check_H_argument(self, z):
        if not z > 0:
            raise DomainError(f"H and calH need z > 0, got {z}")
        if self.beta >= 1.0 and z < H_SINGULAR_FLOOR:
            raise DomainError(f"z={z} below singularity floor {H_SINGULAR_FLOOR} (beta={self.beta})")

    def H(self, z, method="auto"):
        z = float(z)
        self._check_H_argument(z)
        if method == "auto" and self.has_closed_forms:
            return self._H_closed(z)
        return self._H_quad(z)

    def calH(self, z, method="auto"):
        z = float(z)
        if z == 1.0:
            return 1.0
        self._check_H_argument(z)
        if method == "auto" and self.has_closed_forms:
            return self._calH_closed(z)
        return self._calH_quad(z)

    def Htilde(self, z, method="auto"):
        z = float(z)
        if z < 0:
            raise DomainError(f"Htilde needs z >= 0, got {z}")
        if z == 0.0:
            return 0.0
        if method == "auto" and self.family in ("constant", "linear", "ricker"):
            return self._Htilde_closed(z)
        return self._Htilde_quad(z)

    def _H_closed(self, z):
        fam, c, eps, m = self.family, self.c, self.eps, self.m
        if fam == "constant":
            return (z - 1.0) / c
        if fam == "linear":
            return math.log(z) / c
        if fam == "saturated":
            return math.log(z) + eps / m * (z**m - 1.0)
        return float(special.expi(eps * z) - special.expi(eps))

    def _calH_closed(self, z):
        fam, c, eps, m = self.family, self.c, self.eps, self.m
        if fam == "constant":
            return (z - 1.0) ** 2 / (2.0 * c) + 1.0
        xlogx = z * math.log(z) - z + 1.0
        if fam == "linear":
            return xlogx / c + 1.0
        if fam == "saturated":
            return 1.0 + xlogx + eps / m * ((z ** (m + 1.0) - 1.0) / (m + 1.0) - (z - 1.0))
        ei1 = float(special.expi(eps))
        antider = lambda s: s * float(special.expi(eps * s)) - math.exp(eps * s) / eps  # noqa: E731
        return antider(z) - antider(1.0) - ei1 * (z - 1.0) + 1.0

    def _Htilde_closed(self, z):
        fam, c, eps = self.family, self.c, self.eps
        if fam == "constant":
            return z / math.sqrt(c)
        if fam == "linear":
            return 2.0 * math.sqrt(z / c)
        return math.sqrt(2.0 * math.pi / eps) * float(special.erfi(math.sqrt(eps * z / 2.0)))

    # Quadrature routes integrate in u = ln s, which keeps the integrands
    # smooth across the decades spanned by z.
    def _H_quad(self, z):
        integrand = lambda u: math.exp(u) / self.h(math.exp(u))  # noqa: E731
        return adaptive_simpson(integrand, 0.0, math.log(z), QUAD_TOL, QUAD_MAX_DEPTH)

    def _calH_quad(self, z):
        # int_1^z H = z H(z) - int_1^z s/h(s) ds  (integration by parts, H(1) = 0)
        integrand = lambda u: math.exp(2.0 * u) / self.h(math.exp(u))  # noqa: E731
        moment = adaptive_simpson(integrand, 0.0, math.log(z), QUAD_TOL, QUAD_MAX_DEPTH)
        return z * self._H_quad(z) - moment + 1.0

    def _Htilde_quad(self, z):
        # s = u^q with q = 2/(2 - beta) makes the integrand bounded at 0
        q = 1.0 if self.family == "constant" else 2.0 / (2.0 - self.beta)
        integrand = lambda u: q * u ** (q - 1.0) / math.sqrt(self.h(u**q))  # noqa: E731
        value, err = integrate.quad(integrand, 0.0, z ** (1.0 / q), epsabs=QUAD_TOL, epsrel=0.0, limit=200)
        if not err <= 10 * QUAD_TOL:
            raise NumericError(f"Htilde quadrature error {err:.3g} exceeds tolerance at z={z}")
        return value

    def as_dict(self):
        d = {"family": self.family, "alpha": self.alpha, "beta": self.beta, "n": self.n, "z_range": self.z_range}
        if self.family in ("constant", "linear"):
            d["c"] = self.c
        if self.family in ("saturated", "ricker"):
            d["eps"] = self.eps
        if self.family == "saturated":
            d["m"] = self.m
        if self.family == "tabulated":
            d["table_z"] = list(self.table_z)
            d["table_h"] = list(self.table_h)
        return d


def h_eval(z, spec: TaxisSpec):
    _check_nonnegative("z", z)
    return spec.h(z)


def h_prime(z, spec: TaxisSpec):
    _check_nonnegative("z", z)
    return spec.h_prime(z)


def H_eval(z, spec: TaxisSpec, method="auto"):
    return spec.H(z, method)


def calH_eval(z, spec: TaxisSpec, method="auto"):
    return spec.calH(z, method)


def Htilde_eval(z, spec: TaxisSpec, method="auto"):
    return spec.Htilde(z, method)
