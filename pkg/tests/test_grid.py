import numpy as np
import pytest

from preytaxis.errors import ConfigError, DomainError
from preytaxis.grid import (
    Grid, State, face_gradients, integrate_cells, laplacian, read_snapshot, sample_coefficient, taxis_divergence,
    write_snapshot,
)
from preytaxis.model import TaxisSpec

LINEAR = TaxisSpec("linear", n=1)


def test_grid_geometry():
    g = Grid((2.0, 1.0), (8, 4))
    assert g.n == 2 and g.shape == (8, 4) and g.size == 32
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == pytest.approx(1 / 16)
    np.testing.assert_allclose(g.centers[0][:2], [0.125, 0.375])
    assert g.faces(1)[-1] == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        Grid((1.0,), (2,))
    with pytest.raises(ConfigError):
        Grid((1.0, 1.0, 1.0), (4, 4, 4))


def test_state_validation():
    g = Grid.uniform(8)
    s = State(g, 1.0, np.ones(8), 0.5)
    assert s.is_positive()
    with pytest.raises(ConfigError):
        State(g, np.ones(7), 1.0, 1.0)
    with pytest.raises(DomainError):
        State(g, np.full(8, np.nan), 1.0, 1.0)


def test_laplacian_conserves_and_matches_cosine():
    g = Grid.uniform(200)
    (x,) = g.centers
    u = np.cos(np.pi * x)
    lap = laplacian(u, g)
    assert abs(integrate_cells(lap, g)) < 1e-11
    np.testing.assert_allclose(lap[1:-1], -np.pi**2 * u[1:-1], atol=2e-3)


def test_laplacian_2d_separable():
    g = Grid((1.0, 1.0), (64, 64))
    X, Y = g.mesh()
    u = np.cos(np.pi * X) * np.cos(np.pi * Y)
    lap = laplacian(u, g)
    assert abs(integrate_cells(lap, g)) < 1e-11
    np.testing.assert_allclose(lap[5:-5, 5:-5], -2 * np.pi**2 * u[5:-5, 5:-5], atol=5e-3)


def test_taxis_reduces_to_laplacian_for_constant_h():
    g = Grid.uniform(32)
    rng = np.random.default_rng(0)
    V = rng.random(32)
    W = rng.random(32) + 0.1
    chi = sample_coefficient(1.0, g)
    out = taxis_divergence(V, W, chi, TaxisSpec("constant", c=2.0), g)
    np.testing.assert_allclose(out, 2.0 * laplacian(V, g), atol=1e-12)


@pytest.mark.parametrize("upwind", [False, True])
def test_taxis_divergence_sums_to_zero(upwind):
    g = Grid((1.0, 1.0), (10, 12))
    rng = np.random.default_rng(1)
    V, W = rng.random(g.shape), rng.random(g.shape)
    chi = sample_coefficient("1 + 0.5*sin(x*y)", g)
    out = taxis_divergence(V, W, chi, LINEAR, g, upwind=upwind)
    assert abs(integrate_cells(out, g)) < 1e-13


def test_taxis_oracle_smooth_profile():
    # div(W grad V) with V = cos(pi x), W = 1 + x: -pi sin(pi x) - (1+x) pi^2 cos(pi x)
    g = Grid.uniform(400)
    (x,) = g.centers
    out = taxis_divergence(np.cos(np.pi * x), 1 + x, sample_coefficient(1.0, g), LINEAR, g)
    exact = -np.pi * np.sin(np.pi * x) - (1 + x) * np.pi**2 * np.cos(np.pi * x)
    np.testing.assert_allclose(out[2:-2], exact[2:-2], atol=1e-3)


def test_taxis_rejects_negative_carrier():
    g = Grid.uniform(8)
    with pytest.raises(DomainError):
        taxis_divergence(np.ones(8), -np.ones(8), sample_coefficient(1.0, g), LINEAR, g)


def test_sample_coefficient_extrema():
    g = Grid.uniform(10)
    c = sample_coefficient("2 + cos(pi*x)", g)
    assert c.lower_bound == pytest.approx(1.0) and c.upper_bound == pytest.approx(3.0)
    assert not c.is_constant
    assert sample_coefficient(0.0, g).is_zero


def test_face_gradients_shapes():
    g = Grid((1.0, 2.0), (4, 8))
    gx, gy = face_gradients(np.zeros(g.shape), g)
    assert gx.shape == (3, 8) and gy.shape == (4, 7)


@pytest.mark.parametrize("grid", [Grid.uniform(7), Grid((1.0, 0.5), (5, 4))])
def test_snapshot_round_trip_is_bit_exact(tmp_path, grid):
    rng = np.random.default_rng(3)
    s = State(grid, rng.random(grid.shape), rng.random(grid.shape) * 1e-9, rng.random(grid.shape) + 1e6)
    write_snapshot(tmp_path / "s.csv", s)
    back = read_snapshot(tmp_path / "s.csv", grid)
    for name in "XYZ":
        np.testing.assert_array_equal(getattr(back, name), getattr(s, name))
    with pytest.raises(ConfigError):
        read_snapshot(tmp_path / "s.csv", Grid.uniform(9))
