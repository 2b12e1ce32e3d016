import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluxlab.ansatz import dark_profile, fa_profile
from fluxlab.core import (Grid, ModelParams, PairField, energy, field_from_csv, field_to_csv,
                          gpe_rhs, laplacian, norm, observables, stationary_residual,
                          trap_potential)
from fluxlab.errors import DomainError, ShapeError


def test_trap_potential_values():
    g = Grid.symmetric(10.0, 0.5)
    v = trap_potential(g, ModelParams(1.0, 0.1, 0.1))
    assert v[g.n // 2] == 0.0
    assert v[0] == pytest.approx(0.5 * 0.01 * 100)
    assert np.all(trap_potential(g, ModelParams()) == 0.0)


@pytest.mark.parametrize("order", [2, 4])
def test_laplacian_of_constant_is_zero(order):
    g = Grid.symmetric(5.0, 0.1, order)
    assert np.max(np.abs(laplacian(np.full(g.n, 2.0 + 1j), g))) < 1e-12


def test_three_point_cosine_eigenvalue():
    # cosines with zero slope at both ends are exact eigenvectors of the mirrored stencil
    g = Grid.from_spacing(0.0, 10.0, 0.1)
    q = 3 * np.pi / 10.0
    f = np.cos(q * g.x)
    lam = (2 * np.cos(q * g.dx) - 2) / g.dx**2
    assert np.max(np.abs(laplacian(f, g) - lam * f)) < 1e-10


@pytest.mark.parametrize("order", [2, 4])
def test_laplacian_convergence_order(order):
    errs = []
    for dx in (0.1, 0.05, 0.025):
        g = Grid.from_spacing(0.0, 4.0, dx, order)
        q = 2 * np.pi / 4.0
        errs.append(np.max(np.abs(laplacian(np.cos(q * g.x), g) + q * q * np.cos(q * g.x))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - order) < 0.2)


def test_fa_is_stationary_and_rhs_vanishes(free_grid):
    p = ModelParams(1.0, 0.1)
    s = fa_profile(free_grid, p)
    assert stationary_residual(s, p, free_grid).max_abs() < 1e-3
    d = gpe_rhs(s, p, free_grid)
    r = stationary_residual(s, p, free_grid)
    assert np.allclose(d.psi1, -1j * r.psi1) and np.allclose(d.psi2, -1j * r.psi2)


def test_energy_gradient_is_residual(rng):
    g = Grid.symmetric(6.0, 0.1)
    p = ModelParams(1.0, 0.2, 0.1)
    s = PairField(rng.normal(size=g.n) + 1j * rng.normal(size=g.n),
                  rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
    d = PairField(rng.normal(size=g.n) + 1j * rng.normal(size=g.n),
                  rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
    h = 1e-6
    plus = PairField(s.psi1 + h * d.psi1, s.psi2 + h * d.psi2)
    minus = PairField(s.psi1 - h * d.psi1, s.psi2 - h * d.psi2)
    fd = (energy(plus, p, g) - energy(minus, p, g)) / (2 * h)
    r = stationary_residual(s, p, g)
    exact = 2 * g.integrate((np.conj(r.psi1) * d.psi1 + np.conj(r.psi2) * d.psi2).real)
    assert fd == pytest.approx(exact, rel=1e-6)


def test_windings(free_grid):
    fa = observables(fa_profile(free_grid, ModelParams(1.0, 0.1)), ModelParams(1.0, 0.1), free_grid)
    assert abs(abs(fa.relative_winding) - 2 * np.pi) < 0.05
    dk = observables(dark_profile(free_grid, ModelParams(1.0, 0.5)), ModelParams(1.0, 0.5), free_grid)
    assert abs(dk.relative_winding) < 1e-12
    assert dk.norm == pytest.approx(norm(dark_profile(free_grid, ModelParams(1.0, 0.5)), free_grid))


@given(st.floats(0, 2 * np.pi))
def test_norm_invariant_under_global_phase(theta):
    g = Grid.symmetric(10.0, 0.1)
    s = fa_profile(g, ModelParams(1.0, 0.2))
    rot = PairField(np.exp(1j * theta) * s.psi1, np.exp(1j * theta) * s.psi2)
    assert norm(rot, g) == pytest.approx(norm(s, g), rel=1e-13)


def test_trapezoid_norm_of_background():
    g = Grid.symmetric(10.0, 0.1)
    s = PairField.single(np.full(g.n, 1.0 + 0j))
    assert norm(s, g) == pytest.approx(40.0)


def test_csv_roundtrip(tmp_path):
    g = Grid.symmetric(5.0, 0.25)
    s = fa_profile(g, ModelParams(1.0, 0.15), x0=0.3)
    path = tmp_path / "f.csv"
    text = field_to_csv(s, g, path)
    assert text.splitlines()[0] == "x,re_psi1,im_psi1,re_psi2,im_psi2"
    g2, s2 = field_from_csv(path)
    assert (g2.x_min, g2.x_max, g2.n) == (g.x_min, g.x_max, g.n)
    assert np.array_equal(s2.psi1, s.psi1) and np.array_equal(s2.psi2, s.psi2)
    assert field_to_csv(s2, g2) == text


def test_validation():
    with pytest.raises(DomainError):
        ModelParams(rho0=0.0)
    with pytest.raises(DomainError):
        ModelParams(omega=-1.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, -1.5).background
    with pytest.raises(DomainError):
        Grid(0.0, 1.0, 4)
    with pytest.raises(DomainError):
        Grid(0.0, 1.0, 10, stencil_order=3)
    g = Grid.symmetric(5.0, 0.5)
    with pytest.raises(ShapeError):
        laplacian(np.zeros(g.n + 1), g)
    with pytest.raises(DomainError):
        PairField(np.full(g.n, np.nan), np.zeros(g.n)).validate(g)
