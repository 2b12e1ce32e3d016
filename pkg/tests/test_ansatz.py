import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from fluxlab.ansatz import (PairConfig, SolitonSpec, SpliceWarning, dark_profile, fa_profile,
                            splice, thomas_fermi_envelope, trapped_guess, travelling_dark,
                            two_soliton_exact)
from fluxlab.core import Grid, ModelParams, laplacian, observables, stationary_residual
from fluxlab.errors import DomainError


def test_fa_profile_core_and_tails():
    g = Grid.symmetric(40.0, 0.1)
    p = ModelParams(1.0, 0.1)
    s = fa_profile(g, p)
    mid = g.n // 2
    assert s.psi1[mid] == pytest.approx(1j * np.sqrt(0.7), abs=1e-15)
    assert s.psi1[mid].imag == pytest.approx(0.83666, abs=1e-5)
    assert np.array_equal(s.psi2, s.psi1.conj())
    assert abs(s.psi1[mid]) ** 2 == pytest.approx(1.0 - 3 * 0.1)
    assert abs(s.psi1[0]) ** 2 == pytest.approx(1.1, abs=1e-12)
    assert abs(s.psi1[-1]) ** 2 == pytest.approx(1.1, abs=1e-12)


def test_fa_shift_and_signs():
    g = Grid.symmetric(10.0, 0.1)
    p = ModelParams(1.0, 0.2)
    s = fa_profile(g, p, sign_re=-1, sign_im=-1, x0=1.0)
    i = np.argmin(np.abs(g.x - 1.0))
    assert s.psi1[i].imag == pytest.approx(-np.sqrt(0.4))
    assert s.psi1[-1].real < 0


def test_fa_at_third_is_dark():
    g = Grid.symmetric(20.0, 0.1)
    p = ModelParams(1.0, 1.0 / 3.0)
    fa, dk = fa_profile(g, p), dark_profile(g, p)
    assert np.max(np.abs(fa.psi1 - dk.psi1)) < 1e-14
    assert np.max(np.abs(fa.psi2 - dk.psi2)) < 1e-14


@pytest.mark.parametrize("k", [0.0, -0.1, 0.34, 0.5])
def test_fa_existence_domain(k):
    with pytest.raises(DomainError):
        fa_profile(Grid.symmetric(5.0, 0.5), ModelParams(1.0, k))


def test_dark_profile_values():
    g = Grid.symmetric(40.0, 0.05)
    p = ModelParams(1.0, 0.5)
    s = dark_profile(g, p)
    assert s.psi1[g.n // 2] == 0
    assert s.psi1[-1].real == pytest.approx(np.sqrt(1.5), abs=1e-12)
    # truncation error of the 5-point stencil at dx=0.05 is about 7e-6 for this width
    g4 = Grid.symmetric(40.0, 0.05, 4)
    assert stationary_residual(dark_profile(g4, p), p, g4).max_abs() < 1e-5
    with pytest.raises(DomainError):
        dark_profile(g, ModelParams(1.0, -1.0))


def test_travelling_dark_density():
    g = Grid.symmetric(20.0, 0.01)
    assert np.min(np.abs(travelling_dark(g, 1.0, 0.0)) ** 2) == pytest.approx(0.0, abs=1e-30)
    rho = np.abs(travelling_dark(g, 1.0, 0.5)) ** 2
    assert rho.min() == pytest.approx(0.25, abs=1e-12)
    rho = np.abs(travelling_dark(g, 2.0, 0.3, x0=1.0)) ** 2
    assert rho.min() == pytest.approx(2.0 * 0.09, abs=1e-12)
    assert g.x[np.argmin(rho)] == pytest.approx(1.0)
    for v in (1.0, -1.0, 1.5):
        with pytest.raises(DomainError):
            travelling_dark(g, 1.0, v)


def test_two_soliton_origin_and_far_field():
    g = Grid.symmetric(30.0, 0.05)
    psi = two_soliton_exact(g, 0.0, 1.0, 0.25)
    assert abs(psi[g.n // 2]) < 1e-15
    assert abs(psi[0]) ** 2 == pytest.approx(1.0, abs=1e-10)
    assert abs(psi[-1]) ** 2 == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        two_soliton_exact(g, 0.0, 1.0, 1.0)


@given(st.floats(-20, 20), st.floats(0.01, 0.95))
def test_two_soliton_symmetries(t, rmin):
    g = Grid.symmetric(15.0, 0.1)
    psi = two_soliton_exact(g, t, 1.0, rmin)
    assert np.all(np.isfinite(psi))
    assert np.max(np.abs(psi - psi[::-1])) < 1e-12
    rho_back = np.abs(two_soliton_exact(g, -t, 1.0, rmin)) ** 2
    assert np.max(np.abs(np.abs(psi) ** 2 - rho_back)) < 1e-12


def test_two_soliton_residual():
    g = Grid.symmetric(25.0, 0.05, 4)
    rmin, h = 0.09, 1e-4
    for t in np.linspace(-5, 5, 5):
        psi = two_soliton_exact(g, t, 1.0, rmin)
        dt = (two_soliton_exact(g, t + h, 1.0, rmin) - two_soliton_exact(g, t - h, 1.0, rmin)) / (2 * h)
        res = 1j * dt + 0.5 * laplacian(psi, g) - (np.abs(psi) ** 2 - 1.0) * psi
        assert np.max(np.abs(res)) < 1e-5


def test_splice_single_is_profile():
    g = Grid.symmetric(20.0, 0.1)
    p = ModelParams(1.0, 0.1)
    s = splice([SolitonSpec("FA", 0.0)], p, g)
    f = fa_profile(g, p)
    assert np.array_equal(s.psi1, f.psi1) and np.array_equal(s.psi2, f.psi2)


def test_splice_matches_exact_two_soliton():
    g = Grid.symmetric(40.0, 0.05)
    exact = two_soliton_exact(g, -30.0, 1.0, 0.04)

    def err(x0):
        s = splice([SolitonSpec("travelling_dark", -x0, 0.2),
                    SolitonSpec("travelling_dark", x0, -0.2)], ModelParams(), g).psi1
        phase = np.vdot(s, exact)
        return np.max(np.abs(s * phase / abs(phase) - exact))

    best = minimize_scalar(err, bounds=(5.0, 9.0), method="bounded")
    assert 2 * best.x >= 10
    assert best.fun < 1e-3


def test_splice_winding_and_parity():
    g = Grid.symmetric(40.0, 0.05)
    p = ModelParams(1.0, 0.1)
    specs = [SolitonSpec("FA", -10.0), SolitonSpec("FA", 10.0)]
    single = observables(fa_profile(g, p), p, g).relative_winding
    odd = observables(splice(specs, p, g, "odd"), p, g).relative_winding
    even = observables(splice(specs, p, g, PairConfig.even), p, g).relative_winding
    assert abs(odd - 2 * single) < 0.01 * abs(2 * single)
    assert abs(odd) == pytest.approx(4 * np.pi, rel=0.01)
    assert abs(even) < 0.01
    assert PairConfig.parse("+-") is PairConfig.odd and PairConfig.parse("(++)") is PairConfig.even


def test_splice_warns_on_overlap():
    g = Grid.symmetric(20.0, 0.1)
    with pytest.warns(SpliceWarning):
        splice([SolitonSpec("dark", -1.0), SolitonSpec("dark", 1.0)], ModelParams(), g)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SpliceWarning)
        splice([SolitonSpec("dark", -5.0), SolitonSpec("dark", 5.0)], ModelParams(), g)


def test_soliton_spec_validation():
    assert SolitonSpec("dark", v=0.6).depth == pytest.approx(0.8)
    for bad in (dict(kind="bright"), dict(v=1.0), dict(sign_re=2)):
        with pytest.raises(DomainError):
            SolitonSpec(**bad)


def test_trapped_guess_envelope():
    g = Grid.symmetric(30.0, 0.2)
    p = ModelParams(1.0, 0.2, 0.1)
    env = thomas_fermi_envelope(g, p)
    r_tf = np.sqrt(2.0) / 0.1
    assert r_tf == pytest.approx(14.142, abs=1e-3)
    assert np.all(env[np.abs(g.x) >= r_tf] == 0.0)
    assert np.all(env[np.abs(g.x) < r_tf - 1e-9] > 0.0)
    specs = [SolitonSpec("FA", -1.4), SolitonSpec("FA", 1.4)]
    free = ModelParams(1.0, 0.2, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpliceWarning)
        a = trapped_guess(specs, free, g, "odd")
        b = splice(specs, free, g, "odd")
    assert np.array_equal(a.psi1, b.psi1)
