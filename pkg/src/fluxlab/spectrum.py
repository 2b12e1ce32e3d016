"""Bogoliubov-de Gennes linear stability of stationary states.

Perturbations psi_j = psi0_j + eps [a_j e^{i lam t} + b_j^* e^{-i lam^* t}]
give an eigenproblem for lam; the state is unstable when some Im lam != 0.

The eigenvalues are computed from the equivalent real linearization
z' = A z with z = (Re, Im) of the perturbation and mu = i lam. For
states with psi2 = psi1^* the swap-and-conjugate symmetry splits A into
two independent blocks of half the size.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .core import Grid, ModelParams, PairField, stationary_residual, trap_potential
from .errors import DomainError, FluxlabError

STABILITY_THRESHOLD = 1e-6
ZERO_MODE_OVERLAP = 0.99
ZERO_MODE_CUTOFF = 1e-3


@dataclass
class BdgOperator:
    """Linearization about ``state``; ``generator`` is the real 4n x 4n matrix A."""

    state: PairField
    params: ModelParams
    grid: Grid
    generator: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def scale(self) -> float:
        return self.params.rho0

    @property
    def matrix(self) -> np.ndarray:
        """Dense complex matrix acting on (a1, a2, b1, b2) with eigenvalues lam."""
        n = self.n
        lap = self.grid.laplacian_matrix.toarray()
        pot = trap_potential(self.grid, self.params)
        base = -0.5 * lap + np.diag(pot - self.params.rho0)
        h = np.zeros((2 * n, 2 * n))
        h[:n, :n] = base + np.diag(2 * np.abs(self.state.psi1) ** 2)
        h[n:, n:] = base + np.diag(2 * np.abs(self.state.psi2) ** 2)
        h[:n, n:] = h[n:, :n] = -self.params.k * np.eye(n)
        pp = np.diag(np.concatenate([self.state.psi1**2, self.state.psi2**2]))
        return np.block([[-h, -pp], [pp.conj(), h]])

    @property
    def conjugate_symmetric(self) -> bool:
        s = self.state
        return bool(np.max(np.abs(s.psi2 - s.psi1.conj())) <= 1e-12 * max(1.0, s.max_abs()))

    def norm_estimate(self) -> float:
        return float(sp.linalg.norm(self.generator, 1))


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    modes: np.ndarray | None = None
    excluded: np.ndarray = field(default_factory=lambda: np.empty(0, complex))
    scale: float = 1.0
    symmetry_error: float = 0.0
    symmetry_tolerance: float = np.inf

    @property
    def max_im(self) -> float:
        if self.eigenvalues.size == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues.imag)))

    @property
    def max_unstable(self) -> complex:
        return complex(self.eigenvalues[np.argmax(np.abs(self.eigenvalues.imag))])

    @property
    def stable(self) -> bool:
        return self.max_im < STABILITY_THRESHOLD * self.scale

    @property
    def symmetry_ok(self) -> bool:
        return self.symmetry_error <= self.symmetry_tolerance

    def unstable_eigenvalues(self) -> np.ndarray:
        lam = self.eigenvalues
        return lam[np.abs(lam.imag) >= STABILITY_THRESHOLD * self.scale]

    def to_csv(self, path=None) -> str:
        lam = np.concatenate([self.eigenvalues, self.excluded])
        order = np.lexsort((lam.imag, lam.real))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_lambda", "im_lambda"])
        for z in lam[order]:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def assemble_bdg(state: PairField, params: ModelParams, grid: Grid, tol=1e-10) -> BdgOperator:
    """Linearize the coupled equations about a stationary ``state``.

    Refuses states whose stationary residual exceeds ``100 * tol``.
    """
    state.validate(grid)
    res = stationary_residual(state, params, grid).max_abs()
    if res > 100 * tol:
        raise DomainError(f"state is not stationary (residual {res:.3e} > {100 * tol:.1e})")
    n = grid.n
    lap = grid.laplacian_matrix
    pot = trap_potential(grid, params)
    blocks = []
    for psi in (state.psi1, state.psi2):
        sq = psi * psi
        base = -0.5 * lap + sp.diags(pot - params.rho0 + 2 * np.abs(psi) ** 2)
        # Re R = (base + Re P) u + Im P w ; Im R = Im P u + (base - Re P) w
        re_u, re_w = base + sp.diags(sq.real), sp.diags(sq.imag)
        im_u, im_w = sp.diags(sq.imag), base - sp.diags(sq.real)
        blocks.append((re_u, re_w, im_u, im_w))
    ck = params.k * sp.identity(n)
    (a1, b1, c1, d1), (a2, b2, c2, d2) = blocks
    # u' = Im R, w' = -Re R ; the coupling enters R as -k * other
    gen = sp.bmat([
        [c1, d1, None, -ck],
        [-a1, -b1, ck, None],
        [None, -ck, c2, d2],
        [ck, None, -a2, -b2],
    ], format="csr")
    return BdgOperator(state, params, grid, gen)


def _sector_bases(n):
    eye = sp.identity(n)
    plus = sp.bmat([[eye, None], [None, eye], [eye, None], [None, -eye]]) / np.sqrt(2)
    minus = sp.bmat([[eye, None], [None, eye], [-eye, None], [None, eye]]) / np.sqrt(2)
    return plus.tocsr(), minus.tocsr()


def _to_ab(z, n):
    """Real-form eigenvector (u1, w1, u2, w2) -> (a1, a2, b1, b2)."""
    u1, w1, u2, w2 = (z[i * n:(i + 1) * n] for i in range(4))
    return np.concatenate([u1 + 1j * w1, u2 + 1j * w2, u1.conj() - 1j * w1.conj(),
                           u2.conj() - 1j * w2.conj()])


def _zero_mode_vectors(op: BdgOperator):
    s = op.state
    vecs = [np.concatenate([-s.psi1.imag, s.psi1.real, -s.psi2.imag, s.psi2.real])]
    if op.params.omega == 0.0:
        d = op.grid.derivative_matrix
        d1, d2 = d @ s.psi1, d @ s.psi2
        vecs.append(np.concatenate([d1.real, d1.imag, d2.real, d2.imag]))
    return [v / np.linalg.norm(v) for v in vecs if np.linalg.norm(v) > 0]


def _overlap(vec, modes):
    vec = vec / np.linalg.norm(vec)
    q, _ = np.linalg.qr(np.column_stack(modes))
    return float(np.linalg.norm(q.conj().T @ vec))


def _inverse_iteration(a, mu, iters=3):
    n = a.shape[0]
    shift = mu + 1e-10 * (1 + abs(mu))
    lu = sla.lu_factor(a - shift * np.eye(n), check_finite=False)
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    for _ in range(iters):
        v = sla.lu_solve(lu, v, check_finite=False)
        v /= np.linalg.norm(v)
    return v


def _quadruple_error(lam):
    pts = np.column_stack([lam.real, lam.imag])
    tree = cKDTree(pts)
    err = 0.0
    for mapped in (-lam, lam.conj(), -lam.conj()):
        d, _ = tree.query(np.column_stack([mapped.real, mapped.imag]))
        err = max(err, float(np.max(d)))
    return err


def _solve_full(op, modes):
    a = op.generator.toarray()
    if modes:
        mu, vecs = sla.eig(a, check_finite=False)
    else:
        mu, vecs = sla.eigvals(a, check_finite=False), None

    def vector(i):
        if vecs is not None:
            return vecs[:, i]
        return _inverse_iteration(a, mu[i])

    return mu, vecs, vector


def _solve_reduced(op, modes):
    # T (swap + conjugate) anticommutes with A, so A maps the +1 sector of T
    # into the -1 sector and back; A^2 restricted to a sector gives mu^2.
    plus, minus = _sector_bases(op.n)
    gen = op.generator
    a_mp = (minus.T @ gen @ plus).toarray()
    a_pm = (plus.T @ gen @ minus).toarray()
    c = a_pm @ a_mp
    if modes:
        nu, ys = sla.eig(c, check_finite=False)
    else:
        nu, ys = sla.eigvals(c, check_finite=False), None
    root = np.sqrt(nu.astype(complex))
    mu = np.concatenate([root, -root])
    m = nu.size

    def vector(i):
        j, sign = (i, 1.0) if i < m else (i - m, -1.0)
        y = ys[:, j] if ys is not None else _inverse_iteration(c, nu[j])
        r = sign * root[j]
        lower = a_mp @ y / r if abs(r) > 0 else np.zeros_like(y)
        return plus @ y + minus @ lower

    vecs = None
    if modes:
        vecs = np.column_stack([vector(i) for i in range(2 * m)])
    return mu, vecs, vector


def eig_spectrum(op: BdgOperator, modes=False) -> Spectrum:
    """Dense eigendecomposition of the linearization.

    Eigenvalues within ``ZERO_MODE_CUTOFF`` of zero whose eigenvector
    overlaps the phase mode (or, without a trap, the translation mode)
    by more than ``ZERO_MODE_OVERLAP`` are moved to ``excluded``.
    ``modes=True`` also returns all eigenvectors as (a1, a2, b1, b2).
    """
    n = op.n
    solver = _solve_reduced if op.conjugate_symmetric else _solve_full
    try:
        mu, vecs, vector = solver(op, modes)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FluxlabError(f"eigensolver failed: {exc}") from exc
    lam = -1j * mu

    zero_vecs = _zero_mode_vectors(op)
    excluded = np.zeros(lam.size, dtype=bool)
    for idx in np.flatnonzero(np.abs(lam) < ZERO_MODE_CUTOFF * op.scale):
        v = vector(idx)
        v = v / np.linalg.norm(v)
        excluded[idx] = max(abs(np.vdot(z, v)) for z in zero_vecs) > ZERO_MODE_OVERLAP

    keep = np.flatnonzero(~excluded)
    return Spectrum(
        eigenvalues=lam[keep],
        modes=None if vecs is None else np.column_stack([_to_ab(vecs[:, i], n) for i in keep]),
        excluded=lam[excluded],
        scale=op.scale,
        symmetry_error=_quadruple_error(lam),
        symmetry_tolerance=1e-8 * op.norm_estimate(),
    )


def spectrum_of(state: PairField, params: ModelParams, grid: Grid, modes=False, tol=1e-10) -> Spectrum:
    return eig_spectrum(assemble_bdg(state, params, grid, tol), modes=modes)


@dataclass
class SweepRow:
    k: float
    max_im: float
    re_of_max: float


@dataclass
class StabilitySweep:
    rows: list
    threshold: float

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    @property
    def max_im(self) -> np.ndarray:
        return np.array([r.max_im for r in self.rows])

    @property
    def re_of_max(self) -> np.ndarray:
        return np.array([r.re_of_max for r in self.rows])

    @property
    def stable(self) -> np.ndarray:
        return self.max_im < self.threshold

    @property
    def k_cs(self) -> float | None:
        """First k (in sweep order) where the state is stable."""
        idx = np.flatnonzero(self.stable)
        return float(self.k[idx[0]]) if idx.size else None

    @property
    def k_stable_onward(self) -> float | None:
        """Start of the final run of stable points."""
        st = self.stable
        if not st.size or not st[-1]:
            return None
        i = st.size - 1
        while i > 0 and st[i - 1]:
            i -= 1
        return float(self.k[i])

    def windows(self):
        """Consecutive (stable, k_first, k_last) runs along the sweep."""
        out = []
        for r, s in zip(self.rows, self.stable):
            if out and out[-1][0] == bool(s):
                out[-1][2] = r.k
            else:
                out.append([bool(s), r.k, r.k])
        return [tuple(w) for w in out]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "max_im", "re_of_max"])
        for r in self.rows:
            w.writerow([repr(float(r.k)), repr(float(r.max_im)), repr(float(r.re_of_max))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def stability_sweep(branch, params: ModelParams, grid: Grid, workers=1) -> StabilitySweep:
    """Largest growth rate |Im lam| and its |Re lam| at every branch point."""

    def one(pt):
        spec = spectrum_of(pt.state, params.with_k(pt.k), grid)
        lam = spec.max_unstable if spec.eigenvalues.size else 0j
        return SweepRow(pt.k, spec.max_im, abs(lam.real) if not spec.stable else 0.0)

    points = list(branch)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, points))
    else:
        rows = [one(p) for p in points]
    return StabilitySweep(rows, STABILITY_THRESHOLD * params.rho0)
