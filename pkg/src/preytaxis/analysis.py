"""Constant steady states, the reaction Jacobian and stability classification.

The classification evaluates the explicit inequality battery for each kind of
constant equilibrium. Every inequality is stored with both sides so reports
can be audited, and any inequality that holds only to within a relative
``1e-12`` is treated as a boundary case that makes the verdict inconclusive.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import CoefficientField, ModelParams, TaxisSpec, reaction

BOUNDARY_RTOL = 1e-12
KINDS = ("extinction", "prey_only", "semi_coexistence", "coexistence_1", "coexistence_2")
VERDICTS = ("locally_stable", "globally_stable", "unstable", "inconclusive")


@dataclass(frozen=True)
class Equilibrium:
    kind: str
    values: tuple
    feasible: bool
    degenerate: bool = False
    note: str = ""

    @property
    def array(self):
        return np.array(self.values, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "values": [float(v) for v in self.values], "feasible": self.feasible,
                "degenerate": self.degenerate, "note": self.note}


def _make(kind, values, note="", positive=()):
    vals = tuple(float(v) for v in values)
    feasible = all(math.isfinite(v) and v >= 0 for v in vals)
    degenerate = feasible and any(vals[i] == 0 for i in positive)
    if degenerate and not note:
        note = "a component expected positive vanishes; coincides with a lower-level state"
    return Equilibrium(kind, vals, feasible, degenerate, note)


def _scalar_tau(tau, name):
    if isinstance(tau, CoefficientField):
        if not tau.is_constant:
            raise ConfigError("classification requires constant τ")
        tau = tau.value
    if isinstance(tau, str):
        tau = CoefficientField.coerce(tau)
        return _scalar_tau(tau, name)
    tau = float(tau)
    if tau < 0:
        raise ConfigError(f"{name} must be nonnegative")
    return tau


def quadratic_roots(a, b, c):
    """Real roots of ``a x^2 + b x + c`` in ascending order, cancellation-free.

    Returns an empty tuple when there are none; a single root when ``a = 0``.
    """
    if a == 0:
        return () if b == 0 else (-c / b,)
    disc = b * b - 4 * a * c
    if disc < 0:
        return ()
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0:
        return (0.0, 0.0)
    return tuple(sorted((q / a, c / q)))


def coexistence_prey_quadratic(params: ModelParams, tau1, Ystar):
    """Coefficients of the prey quadratic satisfied at a coexistence state."""
    return (tau1 / params.K, 1.0 / params.K - tau1, params.mu1 * Ystar / params.r - 1.0)


def compute_equilibria(params: ModelParams, tau1=0.0, tau2=0.0):
    """All constant steady states; infeasible ones are flagged, not dropped."""
    p = params
    tau1 = _scalar_tau(tau1, "tau1")
    tau2 = _scalar_tau(tau2, "tau2")
    out = [_make("extinction", (0, 0, 0)), _make("prey_only", (p.K, 0, 0))]

    den1 = p.mu1 * p.e1 - tau1 * p.d1
    if den1 > 0:
        Xs = p.d1 / den1
        Ys = p.e1 * p.r / p.d1 * Xs * (1 - Xs / p.K)
        out.append(_make("semi_coexistence", (Xs, Ys, 0), positive=(0, 1)))
    else:
        out.append(Equilibrium("semi_coexistence", (math.nan,) * 3, False,
                               note="mu1 e1 - tau1 d1 <= 0: no semi-coexistence state"))

    den2 = p.mu2 * p.e2 - tau2 * p.d2
    if den2 <= 0:
        for k in ("coexistence_1", "coexistence_2"):
            out.append(Equilibrium(k, (math.nan,) * 3, False, note="mu2 e2 - tau2 d2 <= 0: no coexistence state"))
        return out
    Ys = p.d2 / den2
    roots = quadratic_roots(*coexistence_prey_quadratic(p, tau1, Ys))
    for i, kind in enumerate(("coexistence_1", "coexistence_2")):
        if i >= len(roots):
            note = ("linear prey equation (tau1 = 0) has a single root" if tau1 == 0 and len(roots) == 1
                    else "no real root of the prey quadratic")
            out.append(Equilibrium(kind, (math.nan,) * 3, False, note=note))
            continue
        X = roots[i]
        Z = p.r * p.e1 * p.e2 / p.d2 * X * (1 - X / p.K) - p.e2 * p.d1 / den2
        out.append(_make(kind, (X, Ys, Z), positive=(0, 1, 2)))
    return out


def phi(U, params: ModelParams, tau1=0.0, tau2=0.0):
    X, Y, Z = (float(u) for u in U)
    return np.array(reaction(X, Y, Z, params, tau1, tau2))


def jacobian_phi(U, params: ModelParams, tau1=0.0, tau2=0.0):
    """Analytic Jacobian of the reaction vector at ``U``."""
    X, Y, Z = (float(u) for u in U)
    p = params
    a = 1.0 + tau1 * X
    b = 1.0 + tau2 * Y
    fX = p.mu1 * Y / a**2
    fY = p.mu1 * X / a
    gY = p.mu2 * Z / b**2
    gZ = p.mu2 * Y / b
    return np.array([
        [p.r * (1 - 2 * X / p.K) - fX, -fY, 0.0],
        [p.e1 * fX, p.e1 * fY - gY - p.d1, -gZ],
        [0.0, p.e2 * gY, p.e2 * gZ - p.d2],
    ])


# --------------------------------------------------------------------------
# eigenvalues


def _cubic_coefficients(A):
    tr = A[0, 0] + A[1, 1] + A[2, 2]
    minors = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0] + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
              + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
    det = float(np.linalg.det(A))
    return -tr, minors, -det


def _polish(lam, a, b, c, iters=4):
    best = lam
    pv = lambda z: ((z + a) * z + b) * z + c  # noqa: E731
    res = abs(pv(lam))
    for _ in range(iters):
        d = (3 * best + 2 * a) * best + b
        if d == 0:
            break
        cand = best - pv(best) / d
        r = abs(pv(cand))
        if not r < res:
            break
        best, res = cand, r
    return best


def _quadratic_complex(B, C):
    """Roots of ``z^2 + B z + C``."""
    disc = cmath.sqrt(B * B - 4 * C)
    sgn = 1.0 if (B.conjugate() * disc).real >= 0 else -1.0
    q = -0.5 * (B + sgn * disc)
    if q == 0:
        return 0j, 0j
    return q, C / q


def eigenvalues_3x3(A):
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    The depressed cubic is solved by the trigonometric method when it has
    three real roots and by Cardano's formula otherwise, choosing the sign
    that avoids cancellation. The other pair comes from a deflated quadratic
    and every root gets a guarded Newton polish. Roots are returned sorted by
    ``(real, imag)``.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3) or not np.all(np.isfinite(A)):
        raise ValueError("need a finite 3x3 matrix")
    a, b, c = _cubic_coefficients(A)
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2 * a**3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc < 0 and p < 0:
        m = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * m)))
        theta = math.acos(arg) / 3
        roots = [complex(m * math.cos(theta - 2 * math.pi * k / 3) - shift) for k in range(3)]
    else:
        s = math.sqrt(max(disc, 0.0))
        w = -q / 2 - math.copysign(s, q) if q != 0 else s
        u = math.copysign(abs(w) ** (1 / 3), w)
        y = u - p / (3 * u) if u != 0 else 0.0
        l1 = _polish(complex(y - shift), a, b, c).real
        B = a + l1
        C = b + l1 * B
        r2, r3 = _quadratic_complex(complex(B), complex(C))
        roots = [complex(l1), r2, r3]
    roots = [_polish(z, a, b, c) for z in roots]
    # conjugate pairs stay exact conjugates
    roots = [complex(z.real, 0.0) if abs(z.imag) <= 1e-14 * max(1.0, abs(z)) else z for z in roots]
    return sorted(roots, key=lambda z: (z.real, z.imag))


def is_negative_definite(J, scale_tol=1e-12):
    J = np.asarray(J, dtype=float)
    sym = 0.5 * (J + J.T)
    top = float(np.linalg.eigvalsh(sym).max())
    return top < -scale_tol * max(1.0, float(np.abs(J).max())), top


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Condition:
    """One inequality ``lhs <relation> rhs`` with its evaluation."""

    name: str
    lhs: float
    rhs: float
    relation: str
    satisfied: bool
    boundary: bool

    @classmethod
    def evaluate(cls, name, lhs, rhs, relation):
        lhs, rhs = float(lhs), float(rhs)
        finite = [abs(v) for v in (lhs, rhs) if math.isfinite(v)]
        scale = max([1.0] + finite)
        boundary = math.isfinite(lhs) and math.isfinite(rhs) and abs(lhs - rhs) <= BOUNDARY_RTOL * scale
        if relation == "<":
            ok = lhs < rhs and not boundary
        elif relation == ">":
            ok = lhs > rhs and not boundary
        elif relation == "<=":
            ok = lhs <= rhs or boundary
        elif relation == ">=":
            ok = lhs >= rhs or boundary
        else:
            raise ValueError(f"unknown relation {relation!r}")
        return cls(name, lhs, rhs, relation, bool(ok), bool(boundary))

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "relation": self.relation,
                "satisfied": self.satisfied, "boundary": self.boundary}


@dataclass
class BoundContext:
    """Bounds used to estimate ``sup |chi1(x) h(Y) X / Y|``.

    ``X_bar`` bounds the prey density and ``Y_bar`` the consumer density;
    ``source`` says where they came from.
    """

    X_bar: float
    Y_bar: float
    source: str = "given"

    @classmethod
    def from_state(cls, U, params: ModelParams):
        U = np.asarray(U, dtype=float)
        return cls(max(float(U[0].max()), params.K), float(U[1].max()), "initial data")

    def taxis_sup(self, chi1M, spec: TaxisSpec, samples=400):
        """``chi1M * X_bar * max_{0 < Y <= Y_bar} h(Y)/Y`` on a log grid."""
        if spec.family == "constant":
            return math.inf
        Ys = np.logspace(-12, 0, samples) * self.Y_bar
        ratio = float(np.max(np.asarray(spec.h(Ys)) / Ys))
        return chi1M * self.X_bar * ratio


@dataclass
class StabilityReport:
    equilibrium: Equilibrium
    verdict: str
    reason: str = ""
    conditions: list = field(default_factory=list)
    eigenvalues: list = field(default_factory=list)
    taxis_condition: dict | None = None

    def condition(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "kind": self.equilibrium.kind,
            "values": [float(v) for v in self.equilibrium.values],
            "feasible": self.equilibrium.feasible,
            "degenerate": self.equilibrium.degenerate,
            "verdict": self.verdict,
            "reason": self.reason,
            "conditions": [c.to_dict() for c in self.conditions],
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "taxis_condition": self.taxis_condition,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _coefficient_max(coeff, default=1.0):
    if coeff is None:
        return default
    if hasattr(coeff, "upper_bound"):
        return float(coeff.upper_bound)
    coeff = CoefficientField.coerce(coeff)
    if coeff.is_constant:
        return coeff.value
    raise ConfigError("pass a sampled coefficient to get its maximum")


def _any_boundary(conds):
    return any(c.boundary for c in conds)


def classify(eq: Equilibrium, params: ModelParams, tau1=0.0, tau2=0.0, chi1=1.0, chi2=1.0,
             spec: TaxisSpec | None = None, bound_context: BoundContext | None = None):
    """Stability verdict for one constant equilibrium.

    ``chi1``/``chi2`` may be numbers, fields or sampled coefficients; only
    their maxima enter. ``spec`` defaults to the linear family.
    """
    tau1 = _scalar_tau(tau1, "tau1")
    tau2 = _scalar_tau(tau2, "tau2")
    spec = spec or TaxisSpec("linear")
    p = params
    if not eq.feasible:
        return StabilityReport(eq, "inconclusive", reason=f"infeasible equilibrium: {eq.note or 'negative or undefined component'}")
    J = jacobian_phi(eq.values, p, tau1, tau2)
    eig = eigenvalues_3x3(J)
    rep = StabilityReport(eq, "inconclusive", eigenvalues=eig)
    if eq.degenerate:
        rep.reason = f"degenerate equilibrium: {eq.note}"
        return rep

    if eq.kind == "extinction":
        rep.verdict = "unstable"
        rep.reason = "extinction is always unstable (logistic prey growth)"
        return rep

    if eq.kind == "prey_only":
        K = p.K
        ca = Condition.evaluate("prey_only_a", p.d1, K * (p.mu1 * p.e1 - p.d1 * tau1), ">")
        cb = Condition.evaluate("prey_only_b", p.d1, K * p.mu1 * p.e1, ">=")
        cc = Condition.evaluate("prey_only_c", p.d1, K * (p.mu1 * p.e1 - p.d1 * tau1), "<=")
        rep.conditions = [ca, cb, cc]
        if _any_boundary(rep.conditions):
            rep.reason = "a condition holds only with equality"
        elif cb.satisfied and cc.satisfied:
            rep.reason = "global-stability and instability conditions both hold"
        elif cb.satisfied:
            rep.verdict = "globally_stable"
        elif ca.satisfied:
            rep.verdict = "locally_stable"
        elif cc.satisfied:
            rep.verdict = "unstable"
        return rep

    if eq.kind == "semi_coexistence":
        Xs, Ys, _ = eq.values
        context = bound_context or BoundContext(max(p.K, Xs), Ys, "equilibrium values")
        sup = context.taxis_sup(_coefficient_max(chi1), spec)
        rhs_gate = 4 * p.e1 * p.deltaX * p.deltaY * Xs / ((1 + tau1 * Xs) * Ys)
        g1 = Condition.evaluate("semi_gate_predator", Ys, p.d2 / (p.e2 * p.mu2), "<")
        g2 = Condition.evaluate("semi_gate_taxis", sup**2, rhs_gate, "<")
        thr = -math.inf if tau1 == 0 else p.K - 1.0 / tau1
        ca = Condition.evaluate("semi_a", Xs, 0.5 * thr, ">")
        cb = Condition.evaluate("semi_b", Xs, thr, ">")
        cc = Condition.evaluate("semi_c", Xs, 0.5 * thr, "<=")
        rep.conditions = [g1, g2, ca, cb, cc]
        rep.taxis_condition = {"lhs": sup**2, "rhs": rhs_gate, "satisfied": g2.satisfied,
                               "X_bar": context.X_bar, "Y_bar": context.Y_bar, "source": context.source}
        if _any_boundary(rep.conditions):
            rep.reason = "a condition holds only with equality"
        elif not (g1.satisfied and g2.satisfied):
            rep.reason = "standing hypotheses for the semi-coexistence criteria fail"
        elif cb.satisfied:
            rep.verdict = "globally_stable"
        elif ca.satisfied:
            rep.verdict = "locally_stable"
        elif cc.satisfied:
            rep.verdict = "unstable"
        return rep

    # coexistence
    b_check = matrix_B_check(eq, p, _coefficient_max(chi1), _coefficient_max(chi2), spec)
    negdef, top = is_negative_definite(J)
    re_max = max(z.real for z in eig)
    c_unst = Condition.evaluate("coexistence_b_eigenvalue", re_max, 0.0, ">")
    c_def = Condition.evaluate("coexistence_a_negative_definite", top, 0.0, "<")
    c_def = Condition(c_def.name, c_def.lhs, c_def.rhs, c_def.relation, negdef and not c_def.boundary, c_def.boundary)
    rep.conditions = [b_check, c_def, c_unst]
    rep.taxis_condition = {"lhs": b_check.lhs, "rhs": b_check.rhs, "satisfied": b_check.satisfied}
    if c_unst.satisfied:
        rep.verdict = "unstable"
    elif _any_boundary(rep.conditions):
        rep.reason = "a condition holds only with equality"
    elif b_check.satisfied and c_def.satisfied:
        rep.verdict = "locally_stable"
    else:
        rep.reason = "neither the local-stability nor the instability criterion applies"
    return rep


def matrix_B_check(eq: Equilibrium, params: ModelParams, chi1_val, chi2_val, spec: TaxisSpec,
                   name="coexistence_a_taxis"):
    """``chi1^2 h^2(Y*)/dX + chi2^2 h^2(Z*)/dZ < 4 dY`` as a :class:`Condition`."""
    _, Ys, Zs = eq.values
    lhs = chi1_val**2 * spec.h(Ys) ** 2 / params.deltaX + chi2_val**2 * spec.h(Zs) ** 2 / params.deltaZ
    return Condition.evaluate(name, lhs, 4 * params.deltaY, "<")


@dataclass(frozen=True)
class BCheckResult:
    flag: bool
    margin: float
    lhs: float
    rhs: float
    boundary: bool


def matrix_B_positive_definite(x, eq: Equilibrium, params: ModelParams, chi1, chi2, spec: TaxisSpec):
    """Pointwise positivity condition for the diffusion-taxis matrix at ``x``.

    Returns the flag and ``margin = rhs - lhs``; an equality case gives
    ``flag=False`` with ``boundary=True``.
    """
    c1 = float(CoefficientField.coerce(chi1)(*np.atleast_1d(x)))
    c2 = float(CoefficientField.coerce(chi2)(*np.atleast_1d(x)))
    cond = matrix_B_check(eq, params, c1, c2, spec)
    margin = 0.0 if cond.boundary else cond.rhs - cond.lhs
    return BCheckResult(cond.satisfied, margin, cond.lhs, cond.rhs, cond.boundary)


def classify_all(params: ModelParams, tau1=0.0, tau2=0.0, chi1=1.0, chi2=1.0, spec=None, bound_context=None):
    eqs = compute_equilibria(params, tau1, tau2)
    return [classify(e, params, tau1, tau2, chi1, chi2, spec, bound_context) for e in eqs]
