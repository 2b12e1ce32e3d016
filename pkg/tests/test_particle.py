import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluxlab.errors import DomainError
from fluxlab.particle import (
    ParticleState, dip_trajectory, eq10_frequency, eq26_frequency, fa_effective_accel,
    fa_fixed_point, fa_frequencies, fa_matrix, fixed_point_residual, frequency_csv,
    frequency_sweep, integrate_particles, k_critical_of_v, min_density, min_separation,
    n_body_accelerations, pair_force, pair_potential, potential_energy,
)


def test_min_density():
    assert min_density(1.0, 0.0) == 0.0
    assert min_density(1.0, 1.0) == 1.0
    assert min_density(1.0, 0.5) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        min_density(1.0, 1.2)


def test_min_separation():
    assert min_separation(1.0, 0.1) == pytest.approx(2.988, abs=1e-3)
    assert min_separation(1.0, 0.5 - 1e-9) < 1e-3
    for v in (0.5, 0.6, 0.0):
        with pytest.raises(DomainError):
            min_separation(1.0, v)


def test_dip_trajectory_forms():
    assert dip_trajectory(0.0, 1.0, 0.1) == pytest.approx(0.5 * min_separation(1.0, 0.1))
    t = np.array([60.0, 100.0])
    exact = dip_trajectory(t, 1.0, 0.1)
    approx = dip_trajectory(t, 1.0, 0.1, approx="well_separated")
    assert np.all(np.abs(exact - approx) / exact < 1e-2)
    # the two forms agree to 1e-3 once cosh(qt)/v exceeds 100
    q = 2.0 * np.sqrt(0.01 * 0.99)
    tt = np.arccosh(100 * 0.1) / q + 1.0
    e, a = dip_trajectory(tt, 1.0, 0.1), dip_trajectory(tt, 1.0, 0.1, "well_separated")
    assert abs(e - a) / e < 1e-3
    with pytest.raises(DomainError):
        dip_trajectory(0.0, 1.0, 0.6)
    with pytest.raises(ValueError):
        dip_trajectory(0.0, 1.0, 0.1, approx="bogus")


@pytest.mark.parametrize("t", [0.5, 2.0, 5.0])
def test_gradient_identity(t):
    v, h = 0.1, 1e-3
    A = np.sqrt(1 - v * v)
    x = [dip_trajectory(t + s * h, 1.0, v, "well_separated") for s in (-1, 0, 1)]
    acc = (x[0] - 2 * x[1] + x[2]) / h ** 2
    e = 1e-6
    dw = (pair_potential(x[1] + e, A, 1.0) - pair_potential(x[1] - e, A, 1.0)) / (2 * e)
    assert acc == pytest.approx(-dw, rel=1e-6)
    assert pair_force(x[1], A, 1.0) == pytest.approx(-dw, rel=1e-6)


def test_pair_potential():
    assert pair_potential(1.0, 1.0, 1.0) == pytest.approx(0.03802, abs=1e-5)
    assert pair_potential(50.0, 1.0, 1.0) < 1e-40
    xs = np.linspace(0.5, 5, 20)
    assert np.all(np.diff(pair_potential(xs, 1.0, 1.0)) < 0)
    # A enters the decay rate too: beyond x0 ~ 1/(2A) faster, shallower dips repel more,
    # while at short range W -> 1/(8 x0^2) independently of A
    slow, fast = np.sqrt(1 - 0.04), np.sqrt(1 - 0.25)
    assert pair_potential(2.0, fast, 1.0) > pair_potential(2.0, slow, 1.0)
    assert pair_potential(1e-3, fast, 1.0) == pytest.approx(pair_potential(1e-3, slow, 1.0), rel=1e-5)
    with pytest.raises(DomainError):
        pair_potential(0.0, 1.0, 1.0)


def test_state_validation():
    s = ParticleState([0.0, 1.0], [0.6, 0.0])
    assert np.allclose(s.depths, [0.8, 1.0])
    with pytest.raises(DomainError):
        ParticleState([0.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        ParticleState([0.0], [1.0])
    with pytest.raises(DomainError):
        n_body_accelerations(ParticleState([1.0, 1.0], [0.1, -0.1]), 1.0)


def test_single_dip_is_free():
    assert np.all(n_body_accelerations(ParticleState([0.3], [0.2]), 1.0) == 0)


def test_frozen_accel_is_potential_gradient():
    s = ParticleState([-1.3, 0.4, 2.0], [0.1, -0.05, 0.0])
    a = n_body_accelerations(s, 1.0, frozen=True)
    e = 1e-6
    for i in range(3):
        p, m = s.positions.copy(), s.positions.copy()
        p[i] += e
        m[i] -= e
        sp = ParticleState(p, s.velocities, s.depths)
        sm = ParticleState(m, s.velocities, s.depths)
        g = (potential_energy(sp, 1.0, True) - potential_energy(sm, 1.0, True)) / (2 * e)
        assert a[i] == pytest.approx(-g, rel=1e-6)


def test_symmetric_collision_separation():
    tr = integrate_particles(ParticleState([-15.0, 15.0], [0.1, -0.1]), 300.0, record_every=10)
    assert tr.separation().min() == pytest.approx(min_separation(1.0, 0.1), rel=0.02)


def test_asymmetric_full_exchange():
    tr = integrate_particles(ParticleState([-15.0, 0.0], [0.3, 0.0]), 150.0)
    assert tr.velocities[-1, 0] == pytest.approx(0.0, abs=0.03)
    assert tr.velocities[-1, 1] == pytest.approx(0.3, abs=0.03)


def test_frozen_energy_conservation():
    s = ParticleState([-8.0, 8.0], [0.2, -0.2])
    tr = integrate_particles(s, 100.0, frozen=True)

    def energy(x, v):
        st_ = ParticleState(x, np.zeros_like(v), s.depths)
        return 0.5 * np.sum(v ** 2) + potential_energy(st_, 1.0, frozen=True)

    e = [energy(x, v) for x, v in zip(tr.positions, tr.velocities)]
    assert np.ptp(e) < 1e-8


def test_trajectory_csv(tmp_path):
    tr = integrate_particles(ParticleState([-5.0, 5.0], [0.1, -0.1]), 1.0)
    text = tr.to_csv(tmp_path / "t.csv")
    assert text.splitlines()[0] == "t,x_1,x_2,v_1,v_2"
    assert (tmp_path / "t.csv").read_text() == text


def test_effective_accel_and_frequencies():
    assert np.all(fa_effective_accel(np.linspace(-3, 3, 7), 0.2, 0.1) == 0)
    assert fa_effective_accel(1.0, 0.1, 0.1) > 0
    w = eq10_frequency(1 / 3, 0.1)
    assert w.value == pytest.approx(0.1 / np.sqrt(2)) and not w.imaginary
    assert eq26_frequency(1 / 3, 0.1).value == pytest.approx(np.sqrt(2) * w.value)
    assert eq10_frequency(0.1, 0.1).imaginary
    with pytest.raises(DomainError):
        fa_effective_accel(1.0, -1.0, 0.1)


def test_k_critical():
    assert k_critical_of_v(0.0) == 1 / 3
    assert k_critical_of_v(1.0) == pytest.approx(0.0, abs=1e-15)
    assert k_critical_of_v(0.5) == pytest.approx(0.1813, abs=1e-4)
    v = np.linspace(0, 1, 2001)
    assert np.all(np.diff(k_critical_of_v(v)) < 0)
    with pytest.raises(DomainError):
        k_critical_of_v(1.5)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_k_critical_monotone(a, b):
    lo, hi = sorted((a, b))
    assert k_critical_of_v(lo) >= k_critical_of_v(hi)


def test_fixed_point():
    m = fa_fixed_point(0.3)
    assert m.x_tilde == pytest.approx(-1.615, abs=0.01)
    assert abs(m.residual()) < 1e-10
    assert abs(fixed_point_residual(m.x_tilde, 0.3, 1.0, 0.1)) < 1e-10
    seps = [-2 * fa_fixed_point(0.3, omega=w).x_tilde for w in (0.2, 0.1, 0.05)]
    assert seps[0] < seps[1] < seps[2]
    for k in (0.2, 0.1):
        with pytest.raises(DomainError):
            fa_fixed_point(k)


def test_frequencies_match_eigensolve():
    w_in, w_out = fa_frequencies(0.2, 1.0, 0.1, -2.0)
    assert w_in.value == 0.0
    for k in (0.25, 0.3, 0.45):
        m = fa_fixed_point(k)
        w_in, w_out = m.frequencies()
        assert w_out.value > w_in.value
        lam = np.linalg.eigvalsh(fa_matrix(k, 1.0, 0.1, m.x_tilde))
        # d'' = M d: oscillation frequencies are sqrt(-eigenvalue)
        assert np.sort(np.sqrt(-lam)) == pytest.approx([w_in.value, w_out.value], rel=1e-12)


def test_frequency_sweep_csv(tmp_path):
    rows = frequency_sweep([0.25, 0.3], bdg={0.25: 0.01})
    text = frequency_csv(rows, tmp_path / "f.csv")
    lines = text.splitlines()
    assert lines[0] == "k,omega_in,omega_out,bdg_max_im"
    assert lines[1].endswith("0.01") and lines[2].endswith("nan")
