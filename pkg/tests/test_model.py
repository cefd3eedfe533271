import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from preytaxis.errors import AssumptionError, ConfigError, DomainError
from preytaxis.model import (
    CoefficientField, ModelParams, TaxisSpec, H_eval, Htilde_eval, calH_eval, eval_f, eval_g, eval_phi,
    eval_r, h_eval, h_prime,
)

P1 = ModelParams()


# -- parameters and reaction terms -----------------------------------------

def test_params_defaults_are_p1():
    assert (P1.r, P1.K, P1.e1, P1.e2, P1.mu1, P1.mu2, P1.d1, P1.d2) == (1, 1, 1, 1, 1, 1, 0.5, 0.25)


@pytest.mark.parametrize("name", ["r", "K", "e1", "d1", "mu2", "deltaY"])
def test_nonpositive_parameter_names_assumption(name):
    with pytest.raises(AssumptionError, match=r"\(A_C\)"):
        ModelParams(**{name: -0.5})
    with pytest.raises(AssumptionError):
        ModelParams(**{name: 0.0})


def test_eval_r():
    assert eval_r(0.0, P1) == 0.0
    assert eval_r(P1.K, P1) == 0.0
    assert eval_r(0.5, P1) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        eval_r(-1.0, P1)


def test_eval_f_and_g():
    assert eval_f(0.0, 3.0, 0.0, P1) == 0.0
    assert eval_f(2.0, 3.0, 0.0, P1) == 6.0
    assert eval_f(1.0, 1.0, 0.0, P1, tau1=1.0) == 0.5
    assert eval_g(0.5, 0.0, 0.0, P1) == 0.0
    assert eval_g(0.5, 2.0, 0.0, P1) == 1.0
    assert eval_g(1.0, 1.0, 0.0, P1.replace(mu2=2.0), tau2=3.0) == 0.5
    with pytest.raises(DomainError):
        eval_g(1.0, -1.0, 0.0, P1)


def test_eval_f_spatial_tau():
    tau = CoefficientField.coerce("1 + x")
    x = np.array([0.0, 1.0])
    np.testing.assert_allclose(eval_f(1.0, 1.0, x, P1, tau), [0.5, 1 / 3])


@pytest.mark.parametrize("U", [(0, 0, 0), (1, 0, 0), (0.75, 0.25, 0.25)])
def test_eval_phi_vanishes_at_p1_equilibria(U):
    np.testing.assert_allclose(eval_phi(U, 0.0, P1), 0.0, atol=1e-12)


def test_eval_phi_components():
    # hand substitution at (0.5, 0.5, 0.5)
    np.testing.assert_allclose(eval_phi((0.5, 0.5, 0.5), 0.0, P1), [0.0, -0.25, 0.125])


# -- coefficient fields -----------------------------------------------------

def test_coefficient_field_kinds():
    assert CoefficientField.coerce(2).is_constant
    assert CoefficientField.coerce("3").value == 3.0
    f = CoefficientField.coerce("2 + sin(2*pi*x)")
    assert f(0.25) == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        CoefficientField.coerce("import os")


# -- taxis family -----------------------------------------------------------

def test_h_examples():
    assert h_eval(1.0, TaxisSpec("saturated", eps=1.0, m=1.0)) == 0.5
    assert h_eval(0.0, TaxisSpec("ricker", eps=1.0)) == 0.0
    const = TaxisSpec("constant", c=2.0)
    zs = np.linspace(0, 50, 11)
    np.testing.assert_array_equal(h_eval(zs, const), 2.0)
    np.testing.assert_array_equal(h_prime(zs, const), 0.0)
    with pytest.raises(DomainError):
        h_eval(-1.0, const)


def test_h_prime_matches_finite_differences():
    specs = [TaxisSpec("saturated", eps=0.7, m=0.6), TaxisSpec("ricker", eps=0.3), TaxisSpec("linear", c=2.0)]
    z = np.linspace(0.1, 3.0, 40)
    for s in specs:
        fd = (s.h(z + 1e-6) - s.h(z - 1e-6)) / 2e-6
        np.testing.assert_allclose(s.h_prime(z), fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("spec", [
    TaxisSpec("saturated", eps=2.0, m=0.5), TaxisSpec("ricker", eps=0.5), TaxisSpec("linear"),
    TaxisSpec("tabulated", table_z=(0, 1, 2, 5), table_h=(0, 0.8, 1.0, 1.1), alpha=0.0),
])
def test_h_monotone_on_dense_sample(spec):
    z = np.linspace(0, spec.z_range if spec.family == "ricker" else 20.0, 2001)
    assert np.all(np.diff(spec.h(z)) >= -1e-15)


def test_invalid_specs_name_assumption():
    with pytest.raises(AssumptionError, match=r"\(A_h\)"):
        TaxisSpec("saturated", m=0.1, n=4)  # needs m > 1/3
    with pytest.raises(AssumptionError, match=r"\(A_h\)"):
        TaxisSpec("linear", n=2)  # alpha = 1 is not < 4/(n+2) = 1
    with pytest.raises(AssumptionError):
        TaxisSpec("saturated", m=0.5, alpha=0.9)  # declared exponent disagrees with h
    with pytest.raises(AssumptionError):
        TaxisSpec("ricker", eps=1.0, z_range=5.0)  # h decreases beyond 1/eps
    with pytest.raises(ConfigError):
        TaxisSpec("cubic")


def test_saturated_ratio_bounded_at_infinity():
    s = TaxisSpec("saturated", eps=1.0, m=0.5)
    z = np.logspace(3, 6, 50)
    ratio = s.h(z) / z**s.alpha
    assert 0 < ratio.min() and ratio.max() / ratio.min() < 1.1


def test_table_row_for_linear_h():
    lin = TaxisSpec("linear")
    assert H_eval(math.e, lin) == 1.0
    assert calH_eval(1.0, lin) == 1.0
    assert Htilde_eval(4.0, lin) == 4.0
    assert calH_eval(3.0, lin) == pytest.approx(3 * math.log(3) - 3 + 2)


def test_saturated_H_at_2():
    s = TaxisSpec("saturated", eps=1.0, m=1.0)
    assert H_eval(2.0, s) == pytest.approx(1 + math.log(2), abs=1e-14)
    assert H_eval(2.0, s, method="quadrature") == pytest.approx(1 + math.log(2), abs=1e-10)


@pytest.mark.parametrize("spec", [TaxisSpec("saturated", eps=0.5, m=0.7), TaxisSpec("ricker", eps=0.2),
                                  TaxisSpec("constant", c=1.5)])
def test_closed_forms_against_mpmath(spec):
    mpmath.mp.dps = 30
    h = lambda s: _exact_h(spec, s)  # noqa: E731
    for z in (0.05, 0.7, 2.5, 4.0):
        H_ref = mpmath.quad(lambda s: 1 / h(s), [1, z])
        calH_ref = mpmath.quad(lambda u: mpmath.quad(lambda s: 1 / h(s), [1, u]), [1, z]) + 1
        Ht_ref = mpmath.quad(lambda s: 1 / mpmath.sqrt(h(s)), [0, z])
        assert spec.H(z) == pytest.approx(float(H_ref), abs=1e-11)
        assert spec.calH(z) == pytest.approx(float(calH_ref), abs=1e-10)
        assert spec.Htilde(z) == pytest.approx(float(Ht_ref), abs=1e-9)


def _exact_h(spec, s):
    s = mpmath.mpf(s)
    if spec.family == "saturated":
        return s / (1 + spec.eps * s**spec.m)
    if spec.family == "ricker":
        return s * mpmath.exp(-spec.eps * s)
    return mpmath.mpf(spec.c)


def test_saturated_htilde_hypergeometric_oracle():
    # int_0^z sqrt((1 + eps s)/s) ds = 2 sqrt(z) 2F1(-1/2, 1/2; 3/2; -eps z) for m = 1
    s = TaxisSpec("saturated", eps=0.8, m=1.0)
    for z in (0.3, 1.0, 7.0):
        ref = 2 * mpmath.sqrt(z) * mpmath.hyp2f1(-0.5, 0.5, 1.5, -0.8 * z)
        assert s.Htilde(z) == pytest.approx(float(ref), abs=1e-9)


def test_tabulated_requires_quadrature_and_is_consistent():
    s = TaxisSpec("tabulated", table_z=(0, 0.5, 1, 2, 4), table_h=(0, 0.4, 0.7, 1.0, 1.2), alpha=0.0)
    assert not s.has_closed_forms
    assert s.calH(1.0) == 1.0
    assert s.H(3.0) > s.H(2.0) > 0 > s.H(0.5)


def test_H_domain_errors():
    lin = TaxisSpec("linear")
    with pytest.raises(DomainError):
        lin.H(0.0)
    with pytest.raises(DomainError):
        lin.H(1e-15)
    with pytest.raises(DomainError):
        lin.Htilde(-1.0)
    assert lin.Htilde(0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0))
def test_H_increasing_and_calH_positive(a, b):
    s = TaxisSpec("saturated", eps=1.3, m=0.8)
    lo, hi = min(a, b), max(a, b)
    if hi - lo > 1e-9:
        assert s.H(hi) > s.H(lo)
    assert s.calH(lo) > 0


def test_quadrature_matches_closed_form_on_100_points():
    s = TaxisSpec("saturated", eps=1.0, m=1.0)
    zs = np.logspace(-3, 3, 100)
    worst = max(abs(s.H(z) - s.H(z, method="quadrature")) for z in zs)
    assert worst <= 1e-9
