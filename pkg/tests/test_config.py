import warnings

import numpy as np
import pytest

from preytaxis.config import DEFAULTS, load_config, parse_config
from preytaxis.errors import AssumptionError, ConfigError


def test_minimal_config_fills_defaults():
    cfg = parse_config("")
    assert cfg.sections == DEFAULTS
    assert cfg.params.d1 == 0.5 and cfg.grid.shape == (64,) and cfg.spec.family == "linear"
    assert cfg.controller().tol == 1e-7


def test_values_are_typed():
    cfg = parse_config('[params]\nd1 = 2\n[taxis]\nfamily = "saturated"\nm = 0.5\n'
                       '[coefficients]\nchi1 = "2 + sin(2*pi*x)"  # heterogeneous\n')
    assert cfg.params.d1 == 2.0 and cfg.spec.alpha == pytest.approx(0.5)
    assert not cfg.coefficient("chi1").is_constant


@pytest.mark.parametrize("text, tag", [
    ("[params]\nd1 = -0.5", r"\(A_C\)"),
    ('[coefficients]\nchi1 = "sin(2*pi*x)"', r"\(A_χ\)"),
    ("[coefficients]\ntau1 = -1", r"\(A_τ\)"),
    ('[grid]\nn = 2\nnx = 8\nny = 8\n[taxis]\nfamily = "linear"', r"\(A_h\)"),
    ('[initial]\nkind = "expression"\nX = "cos(pi*x)"', r"\(A_I\)"),
])
def test_assumption_violations_are_named(text, tag):
    with pytest.raises(AssumptionError, match=tag):
        parse_config(text)


@pytest.mark.parametrize("text", [
    "[bogus]\na = 1",
    "[params]\nq = 1",
    "[params]\nd1 = abc",
    "[grid]\nn = 4",
    "[run]\nT_end = -1",
    '[run]\nreference = "nowhere"',
    '[initial]\nkind = "perturbed"\nequilibrium = "coexistence_2"',
    '[initial]\nkind = "perturbed"\nmode = "sideways"',
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_four_dimensional_saturated_is_a_grid_error():
    with pytest.raises(ConfigError, match="only n in"):
        parse_config('[grid]\nn = 4\n[taxis]\nfamily = "saturated"\nm = 0.1')


def test_identically_zero_species_warns():
    cfg = parse_config("[initial]\nZ = 0")
    with pytest.warns(UserWarning, match=r"\(A_I\)"):
        U = cfg.initial_state()
    assert np.all(U[2] == 0)


def test_round_trip_is_idempotent(tmp_path):
    cfg = parse_config('[params]\nd1 = 0.75\n[coefficients]\nchi1 = "1 + 0.5*cos(pi*x)"\n'
                       '[initial]\nkind = "random"\namplitude = 0.2\n[run]\nseed = 17')
    text = cfg.serialize()
    again = parse_config(text)
    assert again.sections == cfg.sections and again.serialize() == text and again.digest() == cfg.digest()
    path = tmp_path / "c.ini"
    path.write_text(text)
    assert load_config(path).digest() == cfg.digest()


def test_random_initial_data_is_seeded():
    text = '[initial]\nkind = "random"\namplitude = 0.3\n[grid]\nnx = 16\n[run]\nseed = {}'
    a, b, c = (parse_config(text.format(s)).initial_state() for s in (5, 5, 6))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(a > 0)


def test_perturbed_initial_data():
    cfg = parse_config('[grid]\nnx = 8\n[initial]\nkind = "perturbed"\nequilibrium = "prey_only"\n'
                       'amplitude = 1e-3\nweights = [-1, 1, 0]')
    with pytest.warns(UserWarning, match="identically zero"):
        U = cfg.initial_state()
    np.testing.assert_allclose(U[:, 0], [1 - 1e-3, 1e-3, 0.0])
    cos = parse_config('[grid]\nnx = 8\n[initial]\nkind = "perturbed"\nmode = "cosine"\nequilibrium = "coexistence_1"')
    prof = cos.initial_state()[0] - 0.75
    assert prof[0] == pytest.approx(-prof[-1]) and prof[0] > 0


def test_two_dimensional_expression_initial_data():
    cfg = parse_config('[grid]\nn = 2\nnx = 6\nny = 4\n[taxis]\nfamily = "saturated"\n'
                       '[initial]\nkind = "expression"\nX = "1 + 0.5*cos(pi*x)*cos(pi*y)"')
    U = cfg.initial_state()
    assert U.shape == (3, 6, 4)


def test_with_values_revalidates():
    cfg = parse_config("")
    assert cfg.with_values(**{"params.d1": 2.0}).params.d1 == 2.0
    assert cfg.params.d1 == 0.5
    with pytest.raises(ConfigError):
        cfg.with_values(**{"params.nope": 1.0})
    with pytest.raises(AssumptionError):
        cfg.with_values(**{"params.d1": 0.0})


def test_nonconstant_tau_equilibrium_request():
    cfg = parse_config('[coefficients]\ntau1 = "1 + x"')
    assert not cfg.tau_constant
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(ConfigError, match="constant τ"):
            cfg.equilibrium("prey_only")
