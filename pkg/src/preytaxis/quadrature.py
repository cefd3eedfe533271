"""Adaptive Simpson quadrature with interval bisection."""

from __future__ import annotations

from .errors import QuadratureError


def _simpson(fa, fm, fb, a, b):
    return (b - a) * (fa + 4.0 * fm + fb) / 6.0


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=60):
    """Integrate a scalar function ``f`` over ``[a, b]``.

    Each panel is bisected until the Richardson test
    ``|S_left + S_right - S_whole| <= 15 * tol_panel`` holds, where the
    tolerance is halved with every bisection. The extrapolated value is
    accumulated. ``b < a`` yields the negated integral.

    Raises
    ------
    QuadratureError
        If a panel still fails the test at ``max_depth``.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    total = 0.0
    stack = [(a, b, fa, fm, fb, _simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        a0, b0, fa0, fm0, fb0, whole, eps, depth = stack.pop()
        m0 = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m0), 0.5 * (m0 + b0)
        flm, frm = f(lm), f(rm)
        left = _simpson(fa0, flm, fm0, a0, m0)
        right = _simpson(fm0, frm, fb0, m0, b0)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(
                "adaptive Simpson did not converge",
                interval=(a0, b0), estimate=left + right, error=abs(delta) / 15.0, depth=depth,
            )
        if delta != delta:  # NaN integrand
            raise QuadratureError("non-finite integrand", interval=(a0, b0), estimate=whole, depth=depth)
        stack.append((m0, b0, fm0, frm, fb0, right, 0.5 * eps, depth + 1))
        stack.append((a0, m0, fa0, flm, fm0, left, 0.5 * eps, depth + 1))
    return total
