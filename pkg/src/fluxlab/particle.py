"""Reduced particle model for interacting dark solitons and fluxon analogues.

Soliton cores are point particles with unit mass. Dark solitons repel
through a velocity dependent pair potential; trapped fluxon-analogue
pairs sit at the balance point of that repulsion and the anti-confining
trap force, and oscillate about it in an in-phase and an out-of-phase
mode.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

PARTICLE_DT = 1e-3
FIXED_POINT_BRACKET = (-50.0, -1e-3)


# ---------------------------------------------------------------------------
# closed-form two-soliton kinematics

def min_density(rho0: float, v: float) -> float:
    """Density at the core of a grey soliton of speed parameter ``v``."""
    if abs(v) > 1:
        raise DomainError(f"|v| must not exceed 1, got {v}")
    return rho0 * v * v


def _pq(rho0, v):
    rmin = rho0 * v * v
    return 2.0 * np.sqrt(rho0 - rmin), 2.0 * np.sqrt(rmin * (rho0 - rmin))


def min_separation(rho0: float, v: float) -> float:
    """Closest approach of two dark solitons colliding head-on at speeds +-v.

    Defined for 0 < v < 1/2; faster solitons pass through each other.
    """
    if not 0 < v < 0.5:
        raise DomainError(f"closest approach is defined for 0 < v < 1/2, got {v}")
    p, _ = _pq(rho0, v)
    return float(2.0 / p * np.arccosh(1.0 / v - 2.0 * v))


def dip_trajectory(t, rho0: float, v: float, approx: str = "exact"):
    """Position of the right-hand dip of the symmetric pair at time ``t``.

    ``"exact"`` follows the density minimum of the two-soliton solution;
    ``"well_separated"`` drops the 2v/cosh(qt) correction and is valid
    once the dips are far apart. Accepts scalars or arrays.
    """
    if not 0 < abs(v) < 1:
        raise DomainError(f"need 0 < |v| < 1, got {v}")
    p, q = _pq(rho0, abs(v))
    c = np.cosh(q * np.asarray(t, dtype=float))
    if approx == "exact":
        arg = c / abs(v) - 2.0 * abs(v) / c
    elif approx == "well_separated":
        arg = c / abs(v)
    else:
        raise ValueError(f"unknown approximation {approx!r}")
    if np.any(arg < 1.0):
        raise DomainError("trajectory undefined: arccosh argument below 1 "
                          "(the dips merge for v >= 1/2)")
    x = np.arccosh(arg) / p
    return float(x) if np.ndim(x) == 0 else x


def pair_potential(x0, A, rho0: float):
    """Repulsive energy of two dips at +-x0 with common depth ``A``."""
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 == 0):
        raise DomainError("pair potential is singular at x0 = 0")
    w = rho0 * A * A / (2.0 * np.sinh(2.0 * np.sqrt(rho0) * A * x0) ** 2)
    return float(w) if np.ndim(w) == 0 else w


def pair_force(x0, A, rho0: float):
    """-dW/dx0 for :func:`pair_potential` at fixed depth."""
    s = np.sqrt(rho0)
    z = 2.0 * s * A * np.asarray(x0, dtype=float)
    f = 2.0 * rho0 * s * A ** 3 * np.cosh(z) / np.sinh(z) ** 3
    return float(f) if np.ndim(f) == 0 else f


# ---------------------------------------------------------------------------
# n-body dynamics

@dataclass
class ParticleState:
    """Dip positions, velocities and depths; depths default to sqrt(1 - v^2)."""

    positions: np.ndarray
    velocities: np.ndarray
    depths: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=float)).copy()
        self.velocities = np.atleast_1d(np.asarray(self.velocities, dtype=float)).copy()
        n = self.positions.size
        if n < 1 or self.velocities.size != n:
            raise DomainError("positions and velocities must be non-empty and of equal length")
        if np.any(np.abs(self.velocities) >= 1):
            raise DomainError("dip speeds must stay below 1")
        if self.depths is None:
            self.depths = np.sqrt(1.0 - self.velocities ** 2)
        else:
            self.depths = np.atleast_1d(np.asarray(self.depths, dtype=float)).copy()
            if self.depths.size != n or np.any(self.depths <= 0) or np.any(self.depths > 1):
                raise DomainError("depths must lie in (0, 1], one per dip")

    @property
    def n(self) -> int:
        return self.positions.size


def _pair_terms(d, a, rho0):
    """U = rho0 a^2 / sinh^2(sqrt(rho0) a d) and its partial derivatives."""
    s = math.sqrt(rho0)
    z = s * a * d
    sh, ch = math.sinh(z), math.cosh(z)
    g = 1.0 / (sh * sh)
    g1 = -2.0 * ch * g / sh
    g2 = (4.0 * ch * ch + 2.0) * g * g
    U = rho0 * a * a * g
    Ud = rho0 * s * a ** 3 * g1
    Ua = 2.0 * rho0 * a * g + rho0 * s * a * a * d * g1
    Uaa = 2.0 * rho0 * g + 4.0 * rho0 * s * a * d * g1 + rho0 * rho0 * a * a * d * d * g2
    Uad = 3.0 * rho0 * s * a * a * g1 + rho0 * rho0 * a ** 3 * d * g2
    return U, Ud, Ua, Uaa, Uad


def _check_distinct(x):
    xs = sorted(x)
    if any(b - a < 1e-12 for a, b in zip(xs, xs[1:])):
        raise DomainError("coincident dip positions")


def potential_energy(state: ParticleState, rho0: float, frozen: bool = False) -> float:
    """Total interaction energy; every pair enters once from each partner."""
    x = state.positions.tolist()
    _check_distinct(x)
    A = state.depths if frozen else np.sqrt(1.0 - state.velocities ** 2)
    A = A.tolist()
    n = len(x)
    return float(sum(_pair_terms(x[i] - x[j], 0.5 * (A[i] + A[j]), rho0)[0]
                     for i in range(n) for j in range(i + 1, n)))


def _accel(x, v, depths, rho0, frozen, trap):
    # x, v, depths: lists of floats
    n = len(x)
    out = [trap * xi for xi in x]
    if n == 1:
        return out
    _check_distinct(x)
    grad = [0.0] * n
    if frozen:
        for i in range(n):
            for j in range(i + 1, n):
                Ud = _pair_terms(x[i] - x[j], 0.5 * (depths[i] + depths[j]), rho0)[1]
                grad[i] += Ud
                grad[j] -= Ud
        return [o - g for o, g in zip(out, grad)]

    if any(abs(vi) >= 1.0 for vi in v):
        raise DomainError("dip speed reached 1; depth vanishes")
    A = [math.sqrt(1.0 - vi * vi) for vi in v]
    dA = [-vi / ai for vi, ai in zip(v, A)]
    ddA = [-1.0 / ai ** 3 for ai in A]
    M = np.eye(n)
    mix = [0.0] * n
    for i in range(n):
        for j in range(i + 1, n):
            _, Ud, Ua, Uaa, Uad = _pair_terms(x[i] - x[j], 0.5 * (A[i] + A[j]), rho0)
            grad[i] += Ud
            grad[j] -= Ud
            ai, aj = 0.5 * dA[i], 0.5 * dA[j]
            M[i, i] -= Uaa * ai * ai + 0.5 * Ua * ddA[i]
            M[j, j] -= Uaa * aj * aj + 0.5 * Ua * ddA[j]
            M[i, j] -= Uaa * ai * aj
            M[j, i] -= Uaa * ai * aj
            w = Uad * (v[i] - v[j])
            mix[i] += ai * w
            mix[j] += aj * w
    rhs = [m - g for m, g in zip(mix, grad)]
    if n == 2:
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) < 1e-14:
            raise DomainError("singular mass matrix in the particle model")
        acc = [(M[1, 1] * rhs[0] - M[0, 1] * rhs[1]) / det,
               (M[0, 0] * rhs[1] - M[1, 0] * rhs[0]) / det]
    else:
        try:
            acc = np.linalg.solve(M, rhs).tolist()
        except np.linalg.LinAlgError:
            raise DomainError("singular mass matrix in the particle model") from None
    if not all(math.isfinite(a) for a in acc):
        raise DomainError("singular mass matrix in the particle model")
    return [o + a for o, a in zip(out, acc)]


def n_body_accelerations(state: ParticleState, rho0: float, frozen: bool = False,
                         trap: float = 0.0) -> np.ndarray:
    """Euler-Lagrange accelerations of the n-dip model.

    The pair depth is the mean of the two dip depths. With ``frozen`` the
    depths stored on ``state`` are held fixed and the dynamics reduces to
    x'' = -dV/dx; otherwise each depth follows sqrt(1 - v^2) and the
    velocity dependence of V enters through the mass matrix
    1 - d2V/dv dv and the mixed term d2V/dv dx . v. ``trap`` adds a
    linear force ``trap * x`` on every dip.
    """
    return np.array(_accel(state.positions.tolist(), state.velocities.tolist(),
                           state.depths.tolist(), rho0, frozen, trap))


@dataclass
class ParticleTrajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def to_csv(self, path=None) -> str:
        n = self.positions.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"v_{i + 1}" for i in range(n)])
        for t, x, v in zip(self.times, self.positions, self.velocities):
            w.writerow([repr(float(t))] + [repr(float(a)) for a in x] + [repr(float(b)) for b in v])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def separation(self) -> np.ndarray:
        return np.abs(self.positions[:, -1] - self.positions[:, 0])


def integrate_particles(state: ParticleState, t_end: float, rho0: float = 1.0,
                        dt: float = PARTICLE_DT, frozen: bool = False, trap: float = 0.0,
                        record_every: int = 100) -> ParticleTrajectory:
    """Classical RK4 integration of :func:`n_body_accelerations`."""
    if t_end <= 0 or dt <= 0:
        raise DomainError("t_end and dt must be positive")
    nsteps = int(round(t_end / dt))
    dt = t_end / nsteps
    depths = state.depths.tolist()
    n = state.n

    def f(y):
        return y[n:] + _accel(y[:n], y[n:], depths, rho0, frozen, trap)

    def axpy(y, h, k):
        return [a + h * b for a, b in zip(y, k)]

    y = state.positions.tolist() + state.velocities.tolist()
    ts, ys = [0.0], [y]
    h, d6 = 0.5 * dt, dt / 6.0
    for step in range(1, nsteps + 1):
        k1 = f(y)
        k2 = f(axpy(y, h, k1))
        k3 = f(axpy(y, h, k2))
        k4 = f(axpy(y, dt, k3))
        y = [a + d6 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]
        if step % record_every == 0 or step == nsteps:
            ts.append(step * dt)
            ys.append(y)
    ys = np.array(ys)
    n = state.n
    return ParticleTrajectory(np.array(ts), ys[:, :n], ys[:, n:])


# ---------------------------------------------------------------------------
# fluxon analogues in a trap

def _trap_ratio(k):
    if k == -1:
        raise DomainError("k = -1 is singular")
    return (1.0 - 5.0 * k) / (1.0 + k)


def fa_effective_accel(x0, k: float, omega: float):
    """Acceleration of a single fluxon-analogue core at ``x0`` in the trap."""
    a = _trap_ratio(k) * omega ** 2 * np.asarray(x0, dtype=float)
    return float(a) if a.ndim == 0 else a


@dataclass(frozen=True)
class Frequency:
    """A frequency, or the growth rate sqrt(-w^2) with ``imaginary`` set."""

    value: float
    imaginary: bool = False

    def __float__(self):
        return self.value


def _root(w2) -> Frequency:
    return Frequency(float(np.sqrt(abs(w2))), bool(w2 < 0))


def eq10_frequency(k: float, omega: float) -> Frequency:
    """Small-oscillation frequency of one core under :func:`fa_effective_accel`."""
    return _root(-_trap_ratio(k) * omega ** 2)


def eq26_frequency(k: float, omega: float) -> Frequency:
    """In-phase frequency of the pair Lagrangian, whose trap term carries no 1/2."""
    return _root(-2.0 * _trap_ratio(k) * omega ** 2)


def k_critical_of_v(v):
    """Largest coupling at which a fluxon analogue of speed ``v`` exists."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) > 1):
        raise DomainError("|v| must not exceed 1")
    v2 = v * v
    k = -v2 / 3.0 - 1.0 / 21.0 + 4.0 / 21.0 * np.sqrt(7.0 * v2 * v2 - 7.0 * v2 + 4.0)
    return float(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class TrappedFAModel:
    k: float
    rho0: float
    omega: float
    x_tilde: float

    def residual(self) -> float:
        return fixed_point_residual(self.x_tilde, self.k, self.rho0, self.omega)

    def frequencies(self) -> tuple[Frequency, Frequency]:
        return fa_frequencies(self.k, self.rho0, self.omega, self.x_tilde)


def fixed_point_residual(x, k, rho0, omega) -> float:
    return float(8.0 * rho0 ** 1.5 * np.exp(4.0 * np.sqrt(rho0) * x)
                 - 2.0 * _trap_ratio(k) * omega ** 2 * x)


def fa_fixed_point(k: float, rho0: float = 1.0, omega: float = 0.1) -> TrappedFAModel:
    """Equilibrium half-separation of a trapped fluxon-analogue pair.

    The cores sit at -+|x_tilde|. A balance between the mutual repulsion
    and the trap exists only for k > 1/5, where the trap pushes outward.
    """
    if k <= 0.2:
        raise DomainError(f"no trapped pair equilibrium for k <= 1/5 (k={k})")
    if rho0 <= 0 or omega <= 0:
        raise DomainError("rho0 and omega must be positive")
    lo, hi = FIXED_POINT_BRACKET
    f = lambda x: fixed_point_residual(x, k, rho0, omega)  # noqa: E731
    if f(lo) * f(hi) > 0:
        raise DomainError("equilibrium lies outside the search bracket")
    x = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return TrappedFAModel(k, rho0, omega, float(x))


def fa_matrix(k, rho0, omega, x_tilde) -> np.ndarray:
    """Linearised pair dynamics d'' = M d about the equilibrium."""
    c = 16.0 * rho0 ** 2 * np.exp(4.0 * np.sqrt(rho0) * x_tilde)
    t = 2.0 * _trap_ratio(k) * omega ** 2
    return np.array([[t - c, c], [c, t - c]])


def fa_frequencies(k: float, rho0: float, omega: float,
                   x_tilde: float) -> tuple[Frequency, Frequency]:
    """In-phase and out-of-phase oscillation frequencies about the equilibrium."""
    r = 2.0 * (5.0 * k - 1.0) / (k + 1.0) * omega ** 2
    w_in = _root(r)
    w_out = _root(r + 32.0 * rho0 ** 2 * np.exp(4.0 * np.sqrt(rho0) * x_tilde))
    return w_in, w_out


@dataclass
class FrequencyRow:
    k: float
    omega_in: float
    omega_out: float
    bdg_max_im: float = float("nan")


def frequency_sweep(ks, rho0: float = 1.0, omega: float = 0.1, bdg=None) -> list[FrequencyRow]:
    """Pair frequencies over ``ks``; ``bdg`` maps k to a BdG growth rate."""
    rows = []
    for k in ks:
        model = fa_fixed_point(float(k), rho0, omega)
        w_in, w_out = model.frequencies()
        im = float("nan")
        if bdg is not None:
            im = float(bdg.get(float(k), float("nan")) if hasattr(bdg, "get") else bdg(float(k)))
        rows.append(FrequencyRow(float(k), w_in.value, w_out.value, im))
    return rows


def frequency_csv(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "omega_in", "omega_out", "bdg_max_im"])
    for r in rows:
        w.writerow([repr(r.k), repr(r.omega_in), repr(r.omega_out), repr(r.bdg_max_im)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
