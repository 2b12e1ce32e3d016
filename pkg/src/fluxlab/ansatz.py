"""Closed-form solutions and initial-condition constructors."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .core import Grid, ModelParams, PairField, trap_potential
from .errors import DomainError


class SpliceWarning(UserWarning):
    """Soliton cores are too close for product splicing to be accurate."""


class PairConfig(str, Enum):
    """Relative arrangement of two fluxon analogues.

    Named by the symmetry of Im psi1 across the pair: ``odd`` is the
    (+-) configuration (imaginary humps of opposite sign), ``even`` the
    (++) configuration (same sign).
    """

    odd = "odd"
    even = "even"

    @classmethod
    def parse(cls, value) -> "PairConfig":
        if isinstance(value, cls):
            return value
        aliases = {"+-": "odd", "(+-)": "odd", "++": "even", "(++)": "even"}
        return cls(aliases.get(str(value), str(value)))


KINDS = ("FA", "dark", "travelling_dark")


@dataclass(frozen=True)
class SolitonSpec:
    kind: str = "dark"
    x0: float = 0.0
    v: float = 0.0
    sign_re: int = 1
    sign_im: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown soliton kind {self.kind!r}; expected one of {KINDS}")
        if not abs(self.v) < 1:
            raise DomainError(f"|v| must be below 1, got {self.v}")
        if self.sign_re not in (1, -1) or self.sign_im not in (1, -1):
            raise DomainError("signs must be +1 or -1")

    @property
    def depth(self) -> float:
        return float(np.sqrt(1.0 - self.v**2))


def check_fa_coupling(params: ModelParams):
    if not 0 < params.k <= params.rho0 / 3:
        raise DomainError(
            f"a fluxon analogue exists only for 0 < k <= rho0/3 (got k={params.k}, rho0={params.rho0})"
        )


def fa_profile(grid: Grid, params: ModelParams, sign_re=1, sign_im=1, x0=0.0) -> PairField:
    """Untrapped fluxon analogue, psi1 = psi2* (the trap is ignored).

    At k = rho0/3 the imaginary part vanishes and the profile is the
    coupled dark soliton.
    """
    check_fa_coupling(params)
    rho0, k = params.rho0, params.k
    s = 2.0 * np.sqrt(k) * (grid.x - x0)
    psi = (sign_re * np.sqrt(rho0 + k) * np.tanh(s)
           + sign_im * 1j * np.sqrt(max(rho0 - 3.0 * k, 0.0)) / np.cosh(s))
    return PairField(psi, psi.conj())


def dark_profile(grid: Grid, params: ModelParams, x0=0.0, sign=1) -> PairField:
    """Coupled black soliton psi1 = psi2 = sqrt(rho0+k) tanh(sqrt(rho0+k) x)."""
    c = params.background
    psi = sign * c * np.tanh(c * (grid.x - x0)) + 0j
    return PairField(psi, psi.copy())


def travelling_dark(grid: Grid, rho0: float, v: float, x0=0.0) -> np.ndarray:
    """Grey soliton of the single equation on background ``rho0``.

    ``x0`` is the dip position (the textbook form writes it as
    sqrt(rho0) times a shifted coordinate). Moves with speed sqrt(rho0) v.
    """
    if not abs(v) < 1:
        raise DomainError(f"grey soliton needs |v| < 1, got {v}")
    if not rho0 > 0:
        raise DomainError("rho0 must be positive")
    a = np.sqrt(1.0 - v * v)
    c = np.sqrt(rho0)
    return c * (a * np.tanh(c * a * (grid.x - x0)) + 1j * v)


def _scaled_cosh(a, m):
    return 0.5 * (np.exp(a - m) + np.exp(-a - m))


def _scaled_sinh(a, m):
    return 0.5 * (np.exp(a - m) - np.exp(-a - m))


def two_soliton_exact(grid: Grid, t: float, rho0: float, rho_min: float) -> np.ndarray:
    """Exact pair of dark solitons with velocities +-sqrt(rho_min / rho0).

    Evaluated with a common exponential scale so large |x| or |t| does
    not overflow.
    """
    if not 0 < rho_min < rho0:
        raise DomainError(f"need 0 < rho_min < rho0, got rho_min={rho_min}, rho0={rho0}")
    x = np.asarray(grid.x if isinstance(grid, Grid) else grid, dtype=float)
    q = 2.0 * np.sqrt(rho_min * (rho0 - rho_min))
    p = 2.0 * np.sqrt(rho0 - rho_min)
    a, b = q * t, p * x
    m = np.maximum(abs(a), np.abs(b))
    cq, sq, cp = _scaled_cosh(a, m), _scaled_sinh(a, m), _scaled_cosh(b, m)
    num = (2 * rho0 - 4 * rho_min) * cq - 2 * np.sqrt(rho0 * rho_min) * cp - 2j * q * sq
    den = 2 * np.sqrt(rho0) * cq + 2 * np.sqrt(rho_min) * cp
    return num / den


def _single(spec: SolitonSpec, params: ModelParams, grid: Grid) -> PairField:
    if spec.kind == "FA":
        if spec.v != 0.0:
            from .stationary import travelling_fa

            state = travelling_fa(params, grid, spec.v, x0=spec.x0)
            if spec.sign_im == -1:
                # mirror image in the imaginary direction
                state = PairField(state.psi2.copy(), state.psi1.copy())
            return PairField(spec.sign_re * state.psi1, spec.sign_re * state.psi2)
        return fa_profile(grid, params, spec.sign_re, spec.sign_im, spec.x0)
    c = params.background
    if spec.kind == "dark" and spec.v == 0.0:
        return dark_profile(grid, params, spec.x0, spec.sign_re)
    psi = spec.sign_re * travelling_dark(grid, c * c, spec.v, spec.x0)
    return PairField(psi, psi.copy())


def _apply_parity(specs, parity):
    if parity is None:
        return specs
    parity = PairConfig.parse(parity)
    out, n_fa = [], 0
    for s in specs:
        if s.kind == "FA":
            # factors carry equal signs for (+-); alternate for (++)
            sign = specs[0].sign_im if parity is PairConfig.odd else (
                specs[0].sign_im * (-1) ** n_fa)
            out.append(replace(s, sign_im=sign))
            n_fa += 1
        else:
            out.append(s)
    return out


def splice(states, params: ModelParams, grid: Grid, parity=None) -> PairField:
    """Normalized product of single-soliton profiles.

    ``states`` holds :class:`SolitonSpec` items or ``(spec, position)``
    pairs. For fluxon analogues ``parity`` fixes the relative sign of
    their imaginary parts (see :class:`PairConfig`); ``None`` keeps the
    signs given in the specs. Cores closer than five healing lengths
    trigger a :class:`SpliceWarning`.
    """
    specs = []
    for item in states:
        if isinstance(item, SolitonSpec):
            specs.append(item)
        else:
            spec, pos = item
            specs.append(replace(spec, x0=float(pos)))
    if not specs:
        raise ValueError("splice needs at least one soliton")
    specs = _apply_parity(specs, parity)
    bg = params.background
    xs = sorted(s.x0 for s in specs)
    if len(xs) > 1 and np.min(np.diff(xs)) < 5.0 / bg:
        warnings.warn(
            f"soliton cores separated by {np.min(np.diff(xs)):.3g} < {5.0 / bg:.3g}",
            SpliceWarning, stacklevel=2,
        )
    first = _single(specs[0], params, grid)
    psi1, psi2 = first.psi1.copy(), first.psi2.copy()
    for s in specs[1:]:
        f = _single(s, params, grid)
        psi1 *= f.psi1 / bg
        psi2 *= f.psi2 / bg
    return PairField(psi1, psi2)


def thomas_fermi_envelope(grid: Grid, params: ModelParams) -> np.ndarray:
    """sqrt(max(rho0 - V, 0) / rho0); identically one without a trap."""
    pot = trap_potential(grid, params)
    return np.sqrt(np.maximum(params.rho0 - pot, 0.0) / params.rho0)


def trapped_guess(states, params: ModelParams, grid: Grid, parity=None) -> PairField:
    """Spliced profile shaped by the Thomas-Fermi envelope, a Newton seed."""
    base = splice(states, params, grid, parity)
    env = thomas_fermi_envelope(grid, params)
    return PairField(base.psi1 * env, base.psi2 * env)


def fa_pair(params: ModelParams, grid: Grid, separation: float, parity, trapped=True) -> PairField:
    """Two static fluxon analogues at +-separation/2 in the given configuration."""
    a = 0.5 * separation
    specs = [SolitonSpec("FA", -a), SolitonSpec("FA", a)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpliceWarning)
        if trapped:
            return trapped_guess(specs, params, grid, parity)
        return splice(specs, params, grid, parity)
