"""Exponentially weighted time norms and the convolution operator ``T_{rho,lambda}``.

The weighted norm on ``(0, t)`` is

    ||f||_{L^p_eps(0,t)} = e^{-eps t} ||e^{eps s} f(s)||_{L^p(0,t)}.

A :class:`TimeSeries` is either ``"nodal"`` (values at sample times,
integrated by the trapezoid rule with the weight evaluated exactly at the
nodes) or ``"step"`` (value ``v_i`` held on ``[t_i, t_{i+1})``, integrated
exactly). Step series make every inequality among these norms hold exactly,
which is what the property suites rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str = "nodal"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.kind not in ("nodal", "step"):
            raise DomainError(f"unknown series kind {self.kind!r}")
        if t.ndim != 1 or t.size == 0:
            raise DomainError("empty series")
        need = t.size - 1 if self.kind == "step" else t.size
        if v.shape != (need,):
            raise DomainError(f"{self.kind} series with {t.size} times needs {need} values, got {v.shape}")
        if np.any(np.diff(t) <= 0):
            raise DomainError("series times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def step(cls, breaks, values):
        return cls(breaks, values, kind="step")

    @property
    def start(self):
        return float(self.times[0])

    @property
    def end(self):
        return float(self.times[-1])

    def truncate(self, t):
        """Restrict to ``(times[0], t)``, inserting a node at ``t`` if needed."""
        if not self.start <= t <= self.end * (1 + 1e-14) + 1e-300:
            raise DomainError(f"t={t} outside recorded range [{self.start}, {self.end}]")
        t = min(t, self.end)
        k = int(np.searchsorted(self.times, t, side="left"))
        if k < self.times.size and self.times[k] == t:
            times = self.times[: k + 1]
            vals = self.values[: k] if self.kind == "step" else self.values[: k + 1]
        else:
            times = np.append(self.times[:k], t)
            if self.kind == "step":
                vals = self.values[:k]
            else:
                w = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1])
                vals = np.append(self.values[:k], (1 - w) * self.values[k - 1] + w * self.values[k])
        return times, vals

    def __mul__(self, other):
        if not isinstance(other, TimeSeries):
            return TimeSeries(self.times, self.values * other, self.kind)
        if self.kind != other.kind or not np.array_equal(self.times, other.times):
            raise DomainError("series must share kind and sample times")
        return TimeSeries(self.times, self.values * other.values, self.kind)

    def sup(self, t=None):
        _, vals = self.truncate(self.end if t is None else t)
        return float(np.max(np.abs(vals))) if vals.size else 0.0


def _trapezoid(y, x):
    if x.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def lp_eps_time_norm(series: TimeSeries, p, eps, t=None):
    """Weighted norm ``||f||_{L^p_eps(0, t)}``; ``p = inf`` allowed, ``eps > 0``.

    ``eps = 0`` is accepted and gives the unweighted norm.
    """
    if eps < 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if p != math.inf and p < 1:
        raise DomainError(f"p must be in [1, inf], got {p}")
    t = series.end if t is None else float(t)
    times, vals = series.truncate(t)
    s = times - t
    a = np.abs(vals)
    if series.kind == "nodal":
        y = a * np.exp(eps * s)
        top = float(np.max(y))
        if p == math.inf or top == 0:
            return top
        # scale by the sup so large p neither underflows nor overflows
        return top * _trapezoid((y / top) ** p, s) ** (1.0 / p)
    if vals.size == 0:
        return 0.0
    # sup of e^{eps(s-t)} |v_i| on [t_i, t_{i+1}) is approached at the right end
    y = a * np.exp(eps * s[1:])
    top = float(np.max(y))
    if p == math.inf or top == 0:
        return top
    k = eps * p
    widths = s[1:] - s[:-1]
    # int_{lo}^{hi} e^{k (s - hi)} ds, exactly
    seg = widths if k == 0 else -np.expm1(-k * widths) / k
    with np.errstate(divide="ignore"):
        logs = p * np.log(y / top) + np.log(seg)
    return top * float(np.sum(np.exp(logs))) ** (1.0 / p)


def lp_time_norm(series: TimeSeries, p, t=None):
    return lp_eps_time_norm(series, p, 0.0, t)


def comparison_constant(p, q, eps):
    """Constant ``c`` with ``||f||_{L^p_eps} <= c ||f||_{L^q}`` for ``p <= q``."""
    if not 1 <= p <= q:
        raise DomainError("comparison needs 1 <= p <= q")
    if p == q:
        return 1.0
    if q == math.inf:
        return (1.0 / (eps * p)) ** (1.0 / p)
    e = (q - p) / (p * q)
    return ((q - p) / (eps * p * q)) ** e


def T_bound_constant(p, q, rho, lam, eps):
    """Operator-norm bound of ``T_{rho,lam}`` from ``L^p_eps`` to ``L^q_eps``.

    ``c = (r lam')^{-1/r} + (r lam')^{rho - 1/r} Gamma(1 - rho r)^{1/r}`` with
    ``lam' = lam - eps`` and ``1/p + 1/r = 1/q + 1``.
    """
    if not 0 < eps < lam:
        raise DomainError("need 0 < eps < lambda")
    inv_q = 0.0 if q == math.inf else 1.0 / q
    inv_r = inv_q + 1.0 - 1.0 / p
    if not (p <= q and 1.0 / p + rho < inv_q + 1.0):
        raise DomainError("(p, q, rho) outside the admissible range")
    r = 1.0 / inv_r
    lp = lam - eps
    return (r * lp) ** (-inv_r) + (r * lp) ** (rho - inv_r) * special.gamma(1.0 - rho * r) ** inv_r


def _lower_gamma_diff(nu, x0, x1):
    """``gamma(nu, x1) - gamma(nu, x0)`` (unregularized) for ``0 <= x0 <= x1``."""
    if x0 > nu:
        d = special.gammaincc(nu, x0) - special.gammaincc(nu, x1)
    else:
        d = special.gammainc(nu, x1) - special.gammainc(nu, x0)
    return special.gamma(nu) * d


def _moment(nu, lam, u0, u1):
    """``int_{u0}^{u1} u^{nu-1} e^{-lam u} du``."""
    return lam ** (-nu) * _lower_gamma_diff(nu, lam * u0, lam * u1)


def operator_T(series: TimeSeries, rho, lam, t=None):
    """``T_{rho,lam} phi(t) = int_0^t (1 + (t-s)^{-rho}) e^{-lam (t-s)} phi(s) ds``.

    ``phi`` is the piecewise-linear interpolant of a nodal series (or the
    step function of a step series). The kernel is integrated exactly
    against each linear piece through incomplete Gamma functions, so the
    endpoint singularity needs no special splitting.
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    t = series.end if t is None else float(t)
    times, vals = series.truncate(t)
    total = 0.0
    for i in range(times.size - 1):
        a, b = times[i], times[i + 1]
        ua, ub = t - b, t - a  # u = t - s, ua < ub
        if series.kind == "step":
            c0, c1 = vals[i], 0.0
        else:
            # phi(s) = phi_b + (phi_a - phi_b) * (u - ua) / (ub - ua)
            slope = (vals[i] - vals[i + 1]) / (ub - ua)
            c0, c1 = vals[i + 1] - slope * ua, slope
        for shift in (1.0, 1.0 - rho):  # u^0 and u^{-rho} kernels
            total += c0 * _moment(shift, lam, ua, ub) + c1 * _moment(shift + 1.0, lam, ua, ub)
    return float(total)


def operator_T_series(series: TimeSeries, rho, lam, times=None):
    """Nodal series of ``T phi`` sampled at ``times`` (default: the series times)."""
    times = series.times if times is None else np.asarray(times, dtype=float)
    vals = [0.0 if s <= series.start else operator_T(series, rho, lam, s) for s in times]
    return TimeSeries(times, np.array(vals))
