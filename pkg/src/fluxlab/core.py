"""Model parameters, grids, fields and the discretized coupled GPE.

The model is

    i psi_j,t = -1/2 psi_j,xx + |psi_j|^2 psi_j - rho0 psi_j - k psi_{3-j} + V psi_j

with V(x) = Omega^2 x^2 / 2, on a uniform grid with Neumann ends.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DomainError, ShapeError

PHASE_FLOOR = 1e-12

_FIVE_POINT = (-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0)


@dataclass(frozen=True)
class ModelParams:
    """Chemical potential ``rho0``, linear coupling ``k`` and trap strength ``omega``."""

    rho0: float = 1.0
    k: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise DomainError(f"rho0 must be positive, got {self.rho0}")
        if self.omega < 0:
            raise DomainError(f"omega must be non-negative, got {self.omega}")

    @property
    def background(self) -> float:
        """Amplitude sqrt(rho0 + k) of the uniform in-phase state."""
        self.require_dark_background()
        return float(np.sqrt(self.rho0 + self.k))

    @property
    def healing_length(self) -> float:
        return 1.0 / self.background

    def require_dark_background(self):
        if not self.k > -self.rho0:
            raise DomainError(f"dark-soliton background needs k > -rho0, got k={self.k}")

    def with_k(self, k: float) -> "ModelParams":
        return ModelParams(self.rho0, k, self.omega)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[x_min, x_max]`` with ``n`` points, endpoints included.

    ``stencil_order`` selects the three-point (2) or five-point (4)
    Laplacian; the boundary condition is always Neumann.
    """

    x_min: float
    x_max: float
    n: int
    stencil_order: int = 2
    bc: str = field(default="neumann")

    def __post_init__(self):
        if self.n < 8:
            raise DomainError(f"grid needs at least 8 points, got {self.n}")
        if not self.x_max > self.x_min:
            raise DomainError("x_max must exceed x_min")
        if self.stencil_order not in (2, 4):
            raise DomainError(f"stencil_order must be 2 or 4, got {self.stencil_order}")
        if self.bc != "neumann":
            raise DomainError(f"only Neumann boundaries are supported, got {self.bc!r}")

    @classmethod
    def from_spacing(cls, x_min=-40.0, x_max=40.0, dx=0.2, stencil_order=2):
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(float(x_min), float(x_max), n, stencil_order)

    @classmethod
    def symmetric(cls, half_width=40.0, dx=0.2, stencil_order=2):
        return cls.from_spacing(-half_width, half_width, dx, stencil_order)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x[-1] = self.x_max
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        w.setflags(write=False)
        return w

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, np.asarray(f).real))

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse second-derivative matrix with mirrored ghost points."""
        n = self.n
        if self.stencil_order == 2:
            offsets, coeffs = (-1, 0, 1), (1.0, -2.0, 1.0)
        else:
            offsets, coeffs = (-2, -1, 0, 1, 2), _FIVE_POINT
        rows, cols, vals = [], [], []
        idx = np.arange(n)
        for off, c in zip(offsets, coeffs):
            j = idx + off
            j = np.where(j < 0, -j, j)
            j = np.where(j > n - 1, 2 * (n - 1) - j, j)
            rows.append(idx)
            cols.append(j)
            vals.append(np.full(n, c))
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        return (mat.tocsr() / self.dx**2).tocsr()

    @cached_property
    def derivative_matrix(self) -> sp.csr_matrix:
        """Central first derivative; zero in the end rows (Neumann mirror)."""
        n = self.n
        if self.stencil_order == 2:
            offsets, coeffs = (-1, 1), (-0.5, 0.5)
        else:
            offsets, coeffs = (-2, -1, 1, 2), (1 / 12, -2 / 3, 2 / 3, -1 / 12)
        mat = sp.lil_matrix((n, n))
        for i in range(n):
            for off, c in zip(offsets, coeffs):
                j = i + off
                if j < 0:
                    j = -j
                if j > n - 1:
                    j = 2 * (n - 1) - j
                mat[i, j] += c
        return (mat.tocsr() / self.dx).tocsr()

    def check(self, arr, name="field"):
        arr = np.asarray(arr)
        if arr.shape != (self.n,):
            raise ShapeError(f"{name} has shape {arr.shape}, grid expects ({self.n},)")
        return arr


@dataclass
class PairField:
    """The two complex components sampled on a grid."""

    psi1: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        self.psi1 = np.asarray(self.psi1, dtype=np.complex128)
        self.psi2 = np.asarray(self.psi2, dtype=np.complex128)
        if self.psi1.shape != self.psi2.shape or self.psi1.ndim != 1:
            raise ShapeError("psi1 and psi2 must be 1D arrays of equal length")

    @classmethod
    def single(cls, psi) -> "PairField":
        """Embed a single-component field as psi1 = psi2 = psi."""
        psi = np.asarray(psi, dtype=np.complex128)
        return cls(psi, psi.copy())

    def validate(self, grid: Grid) -> "PairField":
        grid.check(self.psi1, "psi1")
        grid.check(self.psi2, "psi2")
        if not (np.all(np.isfinite(self.psi1)) and np.all(np.isfinite(self.psi2))):
            raise DomainError("field contains non-finite values")
        return self

    def copy(self) -> "PairField":
        return PairField(self.psi1.copy(), self.psi2.copy())

    def conj(self) -> "PairField":
        return PairField(self.psi1.conj(), self.psi2.conj())

    def density(self):
        return np.abs(self.psi1) ** 2, np.abs(self.psi2) ** 2

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.psi1, self.psi2])

    def __sub__(self, other: "PairField") -> "PairField":
        return PairField(self.psi1 - other.psi1, self.psi2 - other.psi2)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.psi1)), np.max(np.abs(self.psi2))))


@dataclass(frozen=True)
class Observables:
    norm: float
    energy: float
    winding1: float
    winding2: float
    relative_winding: float
    phase_undefined: bool = False


def trap_potential(grid: Grid, params: ModelParams) -> np.ndarray:
    """Harmonic trap V(x) = Omega^2 x^2 / 2 on the grid."""
    return 0.5 * params.omega**2 * grid.x**2


def laplacian(field, grid: Grid) -> np.ndarray:
    """Second derivative of ``field`` with the grid's stencil and Neumann ends."""
    field = grid.check(np.asarray(field, dtype=np.complex128))
    return kernels.laplacian(field, grid.dx, grid.stencil_order)


def stationary_residual(state: PairField, params: ModelParams, grid: Grid) -> PairField:
    """Right-hand side of the time-independent equation (zero for stationary states)."""
    state.validate(grid)
    pot = trap_potential(grid, params)
    r1 = (-0.5 * laplacian(state.psi1, grid)
          + (np.abs(state.psi1) ** 2 - params.rho0 + pot) * state.psi1 - params.k * state.psi2)
    r2 = (-0.5 * laplacian(state.psi2, grid)
          + (np.abs(state.psi2) ** 2 - params.rho0 + pot) * state.psi2 - params.k * state.psi1)
    return PairField(r1, r2)


def gpe_rhs(state: PairField, params: ModelParams, grid: Grid) -> PairField:
    """Time derivative d psi_j / dt of the coupled equations."""
    state.validate(grid)
    d1, d2 = kernels.gpe_rhs(
        state.psi1, state.psi2, trap_potential(grid, params),
        params.rho0, params.k, grid.dx, grid.stencil_order,
    )
    return PairField(d1, d2)


def _winding(z, floor=PHASE_FLOOR):
    mask = np.abs(z) >= floor
    zz = z[mask]
    if zz.size < 2:
        return 0.0, True
    inc = np.angle(zz[1:] * zz[:-1].conj())
    # principal branch (-pi, pi]
    inc = np.where(inc <= -np.pi, inc + 2 * np.pi, inc)
    return float(inc.sum()), bool(not mask.all())


def energy(state: PairField, params: ModelParams, grid: Grid) -> float:
    """Discrete Hamiltonian whose weighted gradient is the stationary residual."""
    pot = trap_potential(grid, params)
    e = 0.0
    for psi in (state.psi1, state.psi2):
        rho = np.abs(psi) ** 2
        kin = -0.5 * (psi.conj() * laplacian(psi, grid)).real
        e += grid.integrate(kin + 0.5 * rho**2 + (pot - params.rho0) * rho)
    e -= 2.0 * params.k * grid.integrate((state.psi1.conj() * state.psi2).real)
    return e


def norm(state: PairField, grid: Grid) -> float:
    return grid.integrate(np.abs(state.psi1) ** 2 + np.abs(state.psi2) ** 2)


def observables(state: PairField, params: ModelParams, grid: Grid) -> Observables:
    state.validate(grid)
    w1, f1 = _winding(state.psi1)
    w2, f2 = _winding(state.psi2)
    wr, fr = _winding(state.psi2 * state.psi1.conj(), PHASE_FLOOR**2)
    return Observables(
        norm=norm(state, grid),
        energy=energy(state, params, grid),
        winding1=w1,
        winding2=w2,
        relative_winding=wr,
        phase_undefined=f1 or f2 or fr,
    )


FIELD_COLUMNS = ("x", "re_psi1", "im_psi1", "re_psi2", "im_psi2")


def field_to_csv(state: PairField, grid: Grid, path=None) -> str:
    """Serialize a field as CSV; writes to ``path`` when given and returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_COLUMNS)
    for row in zip(grid.x, state.psi1.real, state.psi1.imag, state.psi2.real, state.psi2.imag):
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def field_from_csv(source) -> tuple[Grid, PairField]:
    """Read a field CSV (path or text) back into a grid and a field.

    The stencil order is not stored; the returned grid uses the default.
    """
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source) else source
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != FIELD_COLUMNS:
        raise ValueError(f"unexpected header {rows[0]}")
    data = np.array(rows[1:], dtype=float)
    x = data[:, 0]
    grid = Grid(float(x[0]), float(x[-1]), len(x))
    return grid, PairField(data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4])
