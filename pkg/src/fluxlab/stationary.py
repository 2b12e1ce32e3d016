"""Newton-Raphson solver for stationary and co-moving states, and continuation in k."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .ansatz import PairConfig, SolitonSpec, SpliceWarning, fa_pair, fa_profile, trapped_guess
from .core import Grid, ModelParams, PairField, stationary_residual, trap_potential
from .errors import ConvergenceError, DomainError

SYMMETRIES = ("conjugate", "free")
FA_THRESHOLD = 1e-4


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 50
    symmetry: str = "conjugate"

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.symmetry not in SYMMETRIES:
            raise DomainError(f"symmetry must be one of {SYMMETRIES}")


@dataclass
class NewtonInfo:
    iterations: int
    residual: float
    history: list = field(default_factory=list)


@dataclass
class BranchPoint:
    k: float
    state: PairField
    imag_amplitude: float
    residual: float


@dataclass
class Branch:
    """Result of a continuation run."""

    points: list
    k_ce: float | None = None
    diagnostic: str = ""

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def k(self) -> np.ndarray:
        return np.array([p.k for p in self.points])

    @property
    def imag_amplitude(self) -> np.ndarray:
        return np.array([p.imag_amplitude for p in self.points])


def imag_amplitude(state: PairField) -> float:
    """max |psi1 - psi2| / 2, which is max |Im psi1| when psi2 = psi1*."""
    return float(np.max(np.abs(state.psi1 - state.psi2)) / 2.0)


def _full_residual(state, params, grid, v):
    r = stationary_residual(state, params, grid)
    if v:
        d = grid.derivative_matrix
        r = PairField(r.psi1 + 1j * v * (d @ state.psi1), r.psi2 + 1j * v * (d @ state.psi2))
    return r


class _System:
    """Real-valued unknowns and Jacobian for one symmetry choice."""

    def __init__(self, params, grid, v, symmetry):
        self.params, self.grid, self.v, self.symmetry = params, grid, v, symmetry
        self.n = grid.n
        self.lap = grid.laplacian_matrix
        self.der = grid.derivative_matrix
        self.pot = trap_potential(grid, params)

    def pack(self, state):
        if self.symmetry == "conjugate":
            psi = 0.5 * (state.psi1 + state.psi2.conj())
            return np.concatenate([psi.real, psi.imag])
        return np.concatenate([state.psi1.real, state.psi1.imag, state.psi2.real, state.psi2.imag])

    def unpack(self, z):
        n = self.n
        if self.symmetry == "conjugate":
            psi = z[:n] + 1j * z[n:]
            return PairField(psi, psi.conj())
        return PairField(z[:n] + 1j * z[n:2 * n], z[2 * n:3 * n] + 1j * z[3 * n:])

    def residual(self, z):
        r = _full_residual(self.unpack(z), self.params, self.grid, self.v)
        if self.symmetry == "conjugate":
            return np.concatenate([r.psi1.real, r.psi1.imag])
        return np.concatenate([r.psi1.real, r.psi1.imag, r.psi2.real, r.psi2.imag])

    def jacobian(self, z):
        n, k, v = self.n, self.params.k, self.v
        s = self.unpack(z)
        half_lap = -0.5 * self.lap

        def block(psi):
            u, w = psi.real, psi.imag
            q = u * u + w * w - self.params.rho0 + self.pot
            return (half_lap + sp.diags(q + 2 * u * u), sp.diags(2 * u * w) - v * self.der,
                    sp.diags(2 * u * w) + v * self.der, half_lap + sp.diags(q + 2 * w * w))

        if self.symmetry == "conjugate":
            a, b, c, d = block(s.psi1)
            eye = sp.identity(n)
            return sp.bmat([[a - k * eye, b], [c, d + k * eye]], format="csc")
        a1, b1, c1, d1 = block(s.psi1)
        a2, b2, c2, d2 = block(s.psi2)
        ck = -k * sp.identity(n)
        return sp.bmat([
            [a1, b1, ck, None],
            [c1, d1, None, ck],
            [ck, None, a2, b2],
            [None, ck, c2, d2],
        ], format="csc")

    def null_directions(self, z):
        """Tangents of exact continuous symmetries: translation and global phase."""
        s = self.unpack(z)
        dirs = []
        if self.params.omega == 0.0:
            dirs.append(self.pack_raw(self.der @ s.psi1, self.der @ s.psi2))
        if self.symmetry == "free":
            dirs.append(self.pack_raw(1j * s.psi1, 1j * s.psi2))
        return [d / np.linalg.norm(d) for d in dirs if np.linalg.norm(d) > 0]

    def pack_raw(self, p1, p2):
        if self.symmetry == "conjugate":
            return np.concatenate([p1.real, p1.imag])
        return np.concatenate([p1.real, p1.imag, p2.real, p2.imag])


def _solve_step(jac, rhs, borders):
    if borders:
        t = np.column_stack(borders)
        m = t.shape[1]
        jac = sp.bmat([[jac, sp.csc_matrix(t)], [sp.csc_matrix(t.T), sp.csc_matrix((m, m))]],
                      format="csc")
        rhs = np.concatenate([rhs, np.zeros(m)])
    try:
        lu = spla.splu(jac)
    except RuntimeError as exc:
        raise ConvergenceError("Jacobian is numerically singular", diagnostic=f"cond=inf ({exc})")
    step = lu.solve(rhs)
    if not np.all(np.isfinite(step)):
        raise ConvergenceError("Jacobian is numerically singular", diagnostic="non-finite step")
    return step[: len(rhs) - len(borders)] if borders else step


def _condition_estimate(jac):
    try:
        lu = spla.splu(jac)
        inv = spla.LinearOperator(jac.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, "T"))
        return float(spla.onenormest(jac) * spla.onenormest(inv))
    except RuntimeError:
        return float("inf")


def _newton(guess, params, grid, settings, v=0.0):
    guess.validate(grid)
    system = _System(params, grid, v, settings.symmetry)
    z = system.pack(guess)
    f = system.residual(z)
    history = [float(np.max(np.abs(f)))]
    for it in range(settings.max_iter + 1):
        err = history[-1]
        if err <= settings.tol:
            break
        if it == settings.max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {settings.max_iter} iterations (residual {err:.3e})",
                residual=err, iterations=it,
            )
        jac = system.jacobian(z)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            try:
                step = _solve_step(jac, -f, system.null_directions(z))
            except ConvergenceError as exc:
                exc.residual, exc.iterations = err, it
                exc.diagnostic += f"; cond~{_condition_estimate(jac):.3e}"
                raise
        # backtracking on the 2-norm of the residual
        f0 = np.linalg.norm(f)
        lam = 1.0
        while True:
            z_new = z + lam * step
            f_new = system.residual(z_new)
            if np.linalg.norm(f_new) <= (1.0 - 1e-4 * lam) * f0 or lam < 1e-4:
                break
            lam *= 0.5
        if lam < 1e-4:
            raise ConvergenceError(
                f"line search stalled at residual {err:.3e}",
                residual=err, iterations=it + 1,
                diagnostic=f"cond~{_condition_estimate(jac):.3e}",
            )
        z, f = z_new, f_new
        history.append(float(np.max(np.abs(f))))
    state = system.unpack(z)
    full = float(_full_residual(state, params, grid, v).max_abs())
    return state, NewtonInfo(iterations=len(history) - 1, residual=full, history=history)


def newton_stationary(guess: PairField, params: ModelParams, grid: Grid,
                      settings: NewtonSettings | None = None, full_output=False):
    """Solve the time-independent coupled equations starting from ``guess``.

    With ``symmetry="conjugate"`` the unknowns are Re/Im of psi1 and
    psi2 = psi1* is imposed. Returns the converged field, or
    ``(field, NewtonInfo)`` when ``full_output`` is set.

    Raises
    ------
    ConvergenceError
        No convergence within ``max_iter`` or a singular Jacobian.
    """
    settings = settings or NewtonSettings()
    state, info = _newton(guess, params, grid, settings)
    return (state, info) if full_output else state


def _contrast(state):
    rho = np.abs(state.psi1) ** 2 + np.abs(state.psi2) ** 2
    return float(rho.max() - rho.min())


def newton_travelling(guess: PairField, v: float, params: ModelParams, grid: Grid,
                      settings: NewtonSettings | None = None, full_output=False):
    """Solve for a state moving rigidly with speed ``v`` (no trap).

    Works in the co-moving coordinate xi = x - v t, where the equation
    gains the term i v psi_xi. Symmetry is always ``free``.
    """
    if params.omega != 0.0:
        raise DomainError("travelling solutions are only defined without a trap")
    if not abs(v) < 1:
        raise DomainError(f"|v| must be below 1, got {v}")
    base = settings or NewtonSettings()
    settings = NewtonSettings(base.tol, base.max_iter, "free")
    state, info = _newton(guess, params, grid, settings, v=v)
    if _contrast(state) < 1e-3 * params.rho0:
        raise ConvergenceError(
            f"solution collapsed to the background at v={v}",
            residual=info.residual, iterations=info.iterations,
            diagnostic="vanishing density contrast",
        )
    return (state, info) if full_output else state


def _velocity_derivative(system, z):
    s = system.unpack(z)
    d = system.der
    return system.pack_raw(1j * (d @ s.psi1), 1j * (d @ s.psi2))


def _arclength_matrix(system, z, tangent, weights):
    jac = system.jacobian(z)
    nulls = system.null_directions(z)
    m = len(nulls)
    t = np.column_stack(nulls)
    top = sp.hstack([jac, sp.csc_matrix(_velocity_derivative(system, z)[:, None]), sp.csc_matrix(t)])
    mid = sp.csc_matrix(np.concatenate([tangent * weights, np.zeros(m)])[None, :])
    bot = sp.csc_matrix(np.hstack([t.T, np.zeros((m, 1 + m))]))
    return sp.vstack([top, mid, bot]).tocsc(), m


def _arclength_to_speed(state, v_target, params, grid, ds=0.05, max_steps=2000, tol=1e-10):
    """Follow the co-moving branch through ``state`` (at v = 0) in arclength.

    The branch need not be monotone in v, so natural continuation can
    stall at folds. Returns the first state on the branch whose speed
    magnitude reaches ``|v_target|``, and its signed speed.
    """
    system = _System(params, grid, 0.0, "free")
    weights = np.append(np.full(4 * grid.n, grid.dx), 1.0)
    y = np.append(system.pack(state), 0.0)
    tangent = np.zeros_like(y)
    tangent[-1] = 1.0
    goal = abs(v_target)

    def solve(mat, rhs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            out = spla.spsolve(mat, rhs)
        if not np.all(np.isfinite(out)):
            raise ConvergenceError("singular arclength system")
        return out

    for _ in range(max_steps):
        sysv = _System(params, grid, y[-1], "free")
        mat, m = _arclength_matrix(sysv, y[:-1], tangent, weights)
        rhs = np.zeros(mat.shape[0])
        rhs[y.size - 1] = 1.0
        new_t = solve(mat, rhs)[: y.size]
        new_t /= np.sqrt(np.sum(weights * new_t**2))
        if np.dot(weights * new_t, tangent) < 0:
            new_t = -new_t
        tangent = new_t
        while True:
            pred = y + ds * tangent
            cand = pred.copy()
            ok = False
            for _it in range(8):
                sysv = _System(params, grid, cand[-1], "free")
                f = sysv.residual(cand[:-1])
                if np.max(np.abs(f)) <= tol:
                    ok = True
                    break
                mat, m = _arclength_matrix(sysv, cand[:-1], tangent, weights)
                rhs = np.concatenate([-f, [-np.dot(weights * tangent, cand - pred)], np.zeros(m)])
                cand = cand + solve(mat, rhs)[: y.size]
            if ok:
                break
            ds *= 0.5
            if ds < 1e-5:
                raise ConvergenceError("arclength continuation in v stalled", residual=float(np.max(np.abs(f))))
        prev, y = y, cand
        if abs(y[-1]) >= goal:
            # interpolate to the crossing and finish with a plain solve
            frac = (goal - abs(prev[-1])) / (abs(y[-1]) - abs(prev[-1]))
            guess = system.unpack(prev[:-1] + frac * (y[:-1] - prev[:-1]))
            v = float(np.sign(y[-1]) * goal)
            return newton_travelling(guess, v, params, grid), v
        if _it <= 3:
            ds = min(1.3 * ds, 0.2)
    raise ConvergenceError(f"no state with speed {v_target} within {max_steps} arclength steps")


def _mirror(state: PairField) -> PairField:
    """Swap the components and reflect x -> -x: maps speed v to -v."""
    return PairField(state.psi2[::-1].copy(), state.psi1[::-1].copy())


@lru_cache(maxsize=32)
def _travelling_fa_local(params, dx, order, half_width, v):
    grid = Grid.symmetric(half_width, dx, order)
    static = newton_stationary(fa_profile(grid, params), params, grid, NewtonSettings(symmetry="free"))
    if v == 0.0:
        return grid, static
    state, reached = _arclength_to_speed(static, v, params, grid)
    if np.sign(reached) != np.sign(v):
        state = _mirror(state)
    return grid, state


def _place(state: PairField, local: Grid, grid: Grid, x0: float) -> PairField:
    """Interpolate a profile centred on ``local`` onto ``grid`` around ``x0``.

    Outside the local window the far-field end values are continued.
    """
    xs = np.clip(grid.x - x0, local.x_min, local.x_max)
    fields = []
    for psi in (state.psi1, state.psi2):
        re = CubicSpline(local.x, psi.real)(xs)
        im = CubicSpline(local.x, psi.imag)(xs)
        fields.append(re + 1j * im)
    return PairField(*fields)


def travelling_fa(params: ModelParams, grid: Grid, v: float, x0=0.0, half_width=30.0) -> PairField:
    """Fluxon analogue moving rigidly with speed ``v`` (no trap), centred at ``x0``.

    Found by arclength continuation from the static one on a local grid
    with the spacing of ``grid``, then placed at ``x0``. The speed along
    the branch is not monotone (near rest the effective mass can be
    negative), so the first branch point with the requested speed is used.
    """
    if params.omega != 0.0:
        raise DomainError("travelling solutions are only defined without a trap")
    if not abs(v) < 1:
        raise DomainError(f"|v| must be below 1, got {v}")
    local, state = _travelling_fa_local(params, grid.dx, grid.stencil_order, float(half_width), float(v))
    return _place(state, local, grid, float(x0))


def branch_point(state: PairField, params: ModelParams, grid: Grid, residual=None) -> BranchPoint:
    if residual is None:
        residual = float(stationary_residual(state, params, grid).max_abs())
    return BranchPoint(params.k, state, imag_amplitude(state), residual)


def continue_in_k(seed: BranchPoint, k_range, dk: float, params: ModelParams, grid: Grid,
                  settings: NewtonSettings | None = None, threshold=FA_THRESHOLD) -> Branch:
    """March the coupling from ``seed.k`` towards ``k_range[1]`` in steps ``dk``.

    Each point reuses the previous solution as its guess. ``k_ce`` is the
    first k whose imaginary amplitude drops below ``threshold``. When a
    step fails it is retried as two half steps; a second failure ends the
    march and the partial branch is returned with a diagnostic.
    """
    settings = settings or NewtonSettings()
    k_lo, k_hi = sorted(k_range)
    direction = 1.0 if k_range[1] >= k_range[0] else -1.0
    step = abs(dk) * direction
    points = [seed]
    k_ce = seed.k if seed.imag_amplitude < threshold else None
    diagnostic = ""
    k = seed.k
    state = seed.state
    n_steps = int(np.floor(abs(k_range[1] - seed.k) / abs(dk) + 1e-9))
    for i in range(1, n_steps + 1):
        k_next = round(seed.k + i * step, 12)
        if not k_lo - 1e-12 <= k_next <= k_hi + 1e-12:
            break
        try:
            state, info = newton_stationary(state, params.with_k(k_next), grid, settings, True)
        except ConvergenceError:
            try:
                mid, _ = newton_stationary(state, params.with_k(k + 0.5 * step), grid, settings, True)
                state, info = newton_stationary(mid, params.with_k(k_next), grid, settings, True)
            except ConvergenceError as exc:
                diagnostic = f"branch lost near k={k_next:.6g}: {exc}"
                break
        k = k_next
        p = BranchPoint(k, state, imag_amplitude(state), info.residual)
        points.append(p)
        if k_ce is None and p.imag_amplitude < threshold:
            k_ce = k
    return Branch(points, k_ce, diagnostic)


# separations that land in the Newton basin of the trapped pair states at Omega=0.1
_PAIR_SEPARATIONS = {PairConfig.odd: (2.8, 2.0, 2.4, 3.2, 1.6), PairConfig.even: (4.8, 4.4, 5.6, 6.8, 4.0)}


def _is_pair(state, grid, parity):
    rho = np.abs(state.psi1) ** 2
    interior = (rho[1:-1] < rho[:-2]) & (rho[1:-1] < rho[2:])
    dips = grid.x[1:-1][interior & (rho[1:-1] < 0.9 * rho.max())]
    if len(dips) != 2:
        return False
    im = state.psi1.imag
    sym = im[::-1] + im if parity is PairConfig.odd else im[::-1] - im
    return bool(np.max(np.abs(sym)) < 1e-6 * max(1.0, np.max(np.abs(im))))


def two_fa_state(params: ModelParams, grid: Grid, parity, separation=None,
                 settings: NewtonSettings | None = None) -> PairField:
    """Stationary trapped pair of fluxon analogues in configuration ``parity``.

    Tries Newton from spliced seeds at a few separations (or the one
    given). Only seeds converging to a two-dip state of the requested
    symmetry are accepted.
    """
    parity = PairConfig.parse(parity)
    seps = (separation,) if separation is not None else _PAIR_SEPARATIONS[parity]
    last = None
    for sep in seps:
        guess = fa_pair(params, grid, sep, parity, trapped=params.omega > 0)
        try:
            state = newton_stationary(guess, params, grid, settings)
        except ConvergenceError as exc:
            last = exc
            continue
        if _is_pair(state, grid, parity):
            return state
    raise ConvergenceError(
        f"no {parity.value} pair state found at k={params.k}", diagnostic=str(last or "")
    )


def dark_pair_state(params: ModelParams, grid: Grid, separation=None,
                    settings: NewtonSettings | None = None) -> PairField:
    """Stationary pair of coupled dark solitons, trapped or free."""
    seps = (separation,) if separation is not None else (3.0, 4.0, 2.5, 5.0)
    last = None
    for sep in seps:
        specs = [SolitonSpec("dark", -0.5 * sep), SolitonSpec("dark", 0.5 * sep)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpliceWarning)
            guess = trapped_guess(specs, params, grid)
        try:
            state = newton_stationary(guess, params, grid, settings)
        except ConvergenceError as exc:
            last = exc
            continue
        rho = np.abs(state.psi1) ** 2
        inner = (rho[1:-1] < rho[:-2]) & (rho[1:-1] < rho[2:]) & (rho[1:-1] < 0.9 * rho.max())
        if imag_amplitude(state) < FA_THRESHOLD and inner.sum() == 2:
            return state
    raise ConvergenceError(f"no dark pair state found at k={params.k}", diagnostic=str(last or ""))
