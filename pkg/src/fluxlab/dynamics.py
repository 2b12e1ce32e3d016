"""Time evolution of the coupled equations and density-dip tracking.

Fields are advanced with the classical fourth-order Runge-Kutta scheme
on the finite-difference grid. Soliton cores are followed as sub-grid
density minima of |psi1|^2.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.signal import find_peaks

from . import kernels
from .ansatz import SolitonSpec, SpliceWarning, splice
from .core import Grid, ModelParams, PairField, energy, norm, trap_potential
from .errors import BlowUpError, DomainError

# |lambda dt| limit of RK4 on the imaginary axis is 2*sqrt(2); keep a margin
RK4_LIMIT = 2.6
BLOWUP_FACTOR = 1e3


@dataclass(frozen=True)
class EvolveSettings:
    """Integration controls.

    ``dt`` defaults to ``cfl * dx**2``. ``record_every`` is a stride in
    steps; by default frames are about ``dx`` apart in time, so a dip
    moving at unit speed shifts by one grid cell per frame. ``noise``
    adds seeded complex Gaussian noise of that amplitude to both
    components at t = 0.
    """

    t_end: float = 100.0
    dt: float | None = None
    record_every: int | None = None
    cfl: float = 0.1
    noise: float = 0.0
    seed: int = 0
    drift_tol: float = 1e-6

    def __post_init__(self):
        if not self.t_end > 0:
            raise DomainError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.cfl > 0:
            raise DomainError(f"cfl must be positive, got {self.cfl}")
        if self.record_every is not None and self.record_every < 1:
            raise DomainError("record_every must be at least 1")
        if self.noise < 0:
            raise DomainError("noise amplitude must be non-negative")

    def resolve(self, grid: Grid):
        """(dt, number of steps, record stride) with t_end hit exactly."""
        dt = self.dt if self.dt is not None else self.cfl * grid.dx**2
        nsteps = max(1, int(np.ceil(self.t_end / dt - 1e-9)))
        dt = self.t_end / nsteps
        stride = self.record_every or max(1, int(round(grid.dx / dt)))
        return dt, nsteps, stride


@dataclass
class TimeSeries:
    """Recorded frames of an evolution with conservation diagnostics."""

    times: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    grid: Grid
    params: ModelParams
    norms: np.ndarray
    energies: np.ndarray
    dt: float
    flags: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def frame(self, i) -> PairField:
        return PairField(self.psi1[i], self.psi2[i])

    @property
    def final(self) -> PairField:
        return self.frame(-1)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])) / abs(self.norms[0]))

    @property
    def energy_drift(self) -> float:
        scale = max(abs(self.energies[0]), 1.0)
        return float(np.max(np.abs(self.energies - self.energies[0])) / scale)

    def density_csv(self, path=None, every=1, x_every=1) -> str:
        """Long-form density table t, x, rho1, rho2 (optionally thinned)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "rho1", "rho2"])
        x = self.grid.x[::x_every]
        for i in range(0, len(self.times), every):
            r1 = np.abs(self.psi1[i, ::x_every]) ** 2
            r2 = np.abs(self.psi2[i, ::x_every]) ** 2
            t = repr(float(self.times[i]))
            for xx, a, b in zip(x, r1, r2):
                w.writerow([t, repr(float(xx)), repr(float(a)), repr(float(b))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _stability_bound(grid: Grid, params: ModelParams, state: PairField) -> float:
    lap = (2.0 if grid.stencil_order == 2 else 8.0 / 3.0) / grid.dx**2
    amp = max(state.max_abs(), 1.0) ** 2
    pot = float(np.max(trap_potential(grid, params)))
    return lap + 2.0 * amp + params.rho0 + abs(params.k) + pot


def evolve(state: PairField, params: ModelParams, grid: Grid,
           settings: EvolveSettings | None = None) -> TimeSeries:
    """Integrate from ``state`` to ``settings.t_end``.

    Frames every ``record_every`` steps are stored together with norm
    and energy. Relative drifts beyond ``drift_tol`` and disturbances
    reaching the domain ends are reported in ``flags``.

    Raises
    ------
    DomainError
        The time step violates the explicit stability bound.
    BlowUpError
        Non-finite or runaway values; carries the last good state.
    """
    settings = settings or EvolveSettings()
    state.validate(grid)
    dt, nsteps, stride = settings.resolve(grid)
    bound = _stability_bound(grid, params, state)
    if bound * dt > RK4_LIMIT:
        raise DomainError(
            f"dt={dt:.3g} exceeds the explicit stability limit {RK4_LIMIT / bound:.3g} for dx={grid.dx:.3g}"
        )
    psi1 = state.psi1.copy()
    psi2 = state.psi2.copy()
    if settings.noise > 0:
        rng = np.random.default_rng(settings.seed)
        shape = (4, grid.n)
        z = settings.noise * rng.standard_normal(shape)
        psi1 += z[0] + 1j * z[1]
        psi2 += z[2] + 1j * z[3]
    pot = trap_potential(grid, params)
    limit = BLOWUP_FACTOR * max(state.max_abs(), 1.0)

    times, f1, f2, norms, energies = [0.0], [psi1], [psi2], [], []

    def record(a, b):
        s = PairField(a, b)
        norms.append(norm(s, grid))
        energies.append(energy(s, params, grid))

    record(psi1, psi2)
    done = 0
    while done < nsteps:
        m = min(stride, nsteps - done)
        new1, new2 = kernels.rk4_steps(psi1, psi2, pot, params.rho0, params.k,
                                       grid.dx, grid.stencil_order, dt, m)
        bad = not (np.all(np.isfinite(new1)) and np.all(np.isfinite(new2)))
        if bad or max(np.max(np.abs(new1)), np.max(np.abs(new2))) > limit:
            raise BlowUpError(f"integration blew up before t={(done + m) * dt:.4g}",
                              last_good=PairField(psi1, psi2), time=done * dt)
        psi1, psi2 = new1, new2
        done += m
        times.append(done * dt)
        f1.append(psi1)
        f2.append(psi2)
        record(psi1, psi2)

    series = TimeSeries(np.array(times), np.array(f1), np.array(f2), grid, params,
                        np.array(norms), np.array(energies), dt)
    if series.norm_drift > settings.drift_tol:
        series.flags.append(f"norm drift {series.norm_drift:.2e}")
    if series.energy_drift > settings.drift_tol:
        series.flags.append(f"energy drift {series.energy_drift:.2e}")
    ends = np.abs(series.psi1[:, [0, -1]]) ** 2
    if np.max(np.abs(ends - ends[0])) > 1e-3 * max(np.max(ends[0]), 1e-12):
        series.flags.append("disturbance reached the boundary")
    return series


# ---------------------------------------------------------------------------
# dip tracking

DIP_CONTRAST = 0.1


def _refine(rho, i, x, dx):
    a, b, c = rho[i - 1], rho[i], rho[i + 1]
    curv = a - 2.0 * b + c
    if curv <= 0:
        return x[i], b
    shift = 0.5 * (a - c) / curv
    return x[i] + shift * dx, b - 0.125 * (a - c) ** 2 / curv


def find_dips(rho, grid: Grid, contrast=DIP_CONTRAST, window=None):
    """Interior density minima with prominence above ``contrast`` times the
    reference density, refined by a three-point parabola.

    Returns arrays of positions and depths sorted by position.
    """
    rho = np.asarray(rho, dtype=float)
    ref = np.percentile(rho, 95)
    idx, _ = find_peaks(-rho, prominence=contrast * ref)
    if window is not None:
        idx = idx[(grid.x[idx] >= window[0]) & (grid.x[idx] <= window[1])]
    pos, dep = [], []
    for i in idx:
        p, d = _refine(rho, i, grid.x, grid.dx)
        pos.append(p)
        dep.append(d)
    return np.array(pos), np.array(dep)


@dataclass
class DipTrack:
    """Trajectories of ``n_dips`` density minima.

    ``positions`` and ``depths`` have one column per dip and NaN where a
    dip is unassigned. ``merged`` marks frames where the dips coalesced
    into one minimum; ``counts`` is the number of dips detected per frame.
    """

    times: np.ndarray
    positions: np.ndarray
    depths: np.ndarray
    counts: np.ndarray
    merged: np.ndarray
    dx: float
    events: list = field(default_factory=list)

    @property
    def n_dips(self) -> int:
        return self.positions.shape[1]

    @property
    def complete(self) -> np.ndarray:
        """Frames in which every dip is assigned."""
        return ~np.any(np.isnan(self.positions), axis=1)

    def separation(self) -> np.ndarray:
        """Distance between the first two dips: zero while merged, NaN while lost."""
        if self.n_dips < 2:
            raise ValueError("separation needs two tracked dips")
        sep = np.abs(self.positions[:, 1] - self.positions[:, 0])
        return np.where(self.merged, 0.0, sep)

    def velocity(self, j, t0, t1) -> float:
        """Least-squares speed of dip ``j`` over [t0, t1]."""
        sel = (self.times >= t0) & (self.times <= t1) & ~np.isnan(self.positions[:, j])
        if sel.sum() < 3:
            return float("nan")
        return float(np.polyfit(self.times[sel], self.positions[sel, j], 1)[0])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "dip_index", "x", "depth"])
        for i, t in enumerate(self.times):
            for j in range(self.n_dips):
                w.writerow([repr(float(t)), j, repr(float(self.positions[i, j])),
                            repr(float(self.depths[i, j]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def track_dips(series: TimeSeries, grid: Grid | None = None, n_dips=2,
               window=None, max_jump=None, contrast=DIP_CONTRAST) -> DipTrack:
    """Follow the ``n_dips`` deepest minima of |psi1|^2 through ``series``.

    Dips are matched between frames to positions predicted from their
    last velocities; a match farther than ``max_jump`` (default 5 dx)
    leaves the dip unassigned. Two detections closer than 2 dx, or a
    single minimum near the predicted midpoint of the pair, count as a
    merge; association is suspended until the dips separate again and
    then resumes from the pre-merge velocities, so crossing dips keep
    their identity. Dips that fade below the detection contrast are
    reported as lost.
    """
    grid = grid or series.grid
    if len(series) == 0:
        raise ValueError("empty time series")
    max_jump = 5.0 * grid.dx if max_jump is None else max_jump
    m = len(series)
    pos = np.full((m, n_dips), np.nan)
    dep = np.full((m, n_dips), np.nan)
    counts = np.zeros(m, dtype=int)
    merged_at = np.zeros(m, dtype=bool)
    events = []
    last = last_t = None
    vel = np.zeros(n_dips)
    status = "ok"
    jumping = set()

    for i in range(m):
        t = series.times[i]
        p, d = find_dips(np.abs(series.psi1[i]) ** 2, grid, contrast, window)
        counts[i] = len(p)
        if len(p) > n_dips:
            keep = np.sort(np.argsort(d)[:n_dips])
            p, d = p[keep], d[keep]
        if last is None:
            if len(p) == n_dips:
                pos[i], dep[i] = p, d
                last, last_t = p.copy(), t
            continue
        pred = last + vel * (t - last_t)
        close = len(p) > 1 and np.min(np.diff(p)) < 2.0 * grid.dx
        if len(p) < n_dips or close:
            mid = pred.mean()
            gap = np.ptp(pred)
            is_merge = close or (n_dips > 1 and len(p) > 0
                                 and np.min(np.abs(p - mid)) <= max(0.25 * gap, 2.0 * grid.dx))
            if is_merge:
                merged_at[i] = True
                if status != "merged":
                    events.append((float(t), "merge"))
                status = "merged"
                continue
            if status == "ok":
                events.append((float(t), "lost"))
            status = "lost"
            # keep whatever is still visible on its nearest track
            for c in range(len(p)):
                r = int(np.argmin(np.abs(pred - p[c])))
                if abs(pred[r] - p[c]) <= max_jump and np.isnan(pos[i, r]):
                    pos[i, r], dep[i, r] = p[c], d[c]
            continue
        cost = np.abs(pred[:, None] - p[None, :])
        rows, cols = linear_sum_assignment(cost)
        resumed = status != "ok"
        if resumed:
            events.append((float(t), "split" if status == "merged" else "found"))
        new = last.copy()
        for r, c in zip(rows, cols):
            if resumed or cost[r, c] <= max_jump:
                pos[i, r], dep[i, r] = p[c], d[c]
                new[r] = p[c]
                jumping.discard(r)
            elif r not in jumping:
                # reported once per episode
                jumping.add(r)
                events.append((float(t), f"jump dip {r}"))
        if not resumed:
            vel = (new - last) / (t - last_t)
        status = "ok"
        last, last_t = new, t
    return DipTrack(series.times.copy(), pos, dep, counts, merged_at, grid.dx, events)


@dataclass(frozen=True)
class InstabilitySummary:
    onset: float | None
    breakup: float | None
    oscillations: int
    displacement: float


def instability_summary(track: DipTrack, threshold=0.5, persist=5) -> InstabilitySummary:
    """Onset, break-up and pair oscillations of an initially stationary pair.

    ``onset`` is the first time a dip moves more than ``threshold`` from
    where it started (or is lost); ``breakup`` the first time more dips
    than tracked appear for ``persist`` consecutive frames. Oscillations
    count separation minima (prominence >= ``threshold``) between them.
    """
    x0 = track.positions[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        moved = np.nanmax(np.abs(track.positions - x0), axis=1)
    lost = ~track.complete & ~track.merged
    flag = (moved > threshold) | lost | track.merged
    onset = float(track.times[np.argmax(flag)]) if flag.any() else None
    extra = track.counts > track.n_dips
    breakup = None
    for i in np.flatnonzero(extra):
        if np.all(extra[i:i + persist]) and i + persist <= extra.size:
            breakup = float(track.times[i])
            break
    osc = 0
    if onset is not None and track.n_dips >= 2:
        stop = breakup if breakup is not None else track.times[-1]
        sel = (track.times >= onset) & (track.times <= stop)
        sep = track.separation()[sel]
        sep = sep[~np.isnan(sep)]
        if sep.size > 2:
            osc = len(find_peaks(-sep, prominence=threshold)[0])
    disp = float(np.nanmax(moved)) if np.any(~np.isnan(moved)) else 0.0
    return InstabilitySummary(onset, breakup, osc, disp)


# ---------------------------------------------------------------------------
# collision scenarios

OUTCOMES = ("repel", "transmit", "energy-exchange", "breather", "break-up", "indeterminate")


@dataclass
class CollisionResult:
    track: DipTrack
    outcome: str
    events: list
    series: TimeSeries
    initial: PairField

    def __iter__(self):
        yield self.track
        yield self.events


def _breakup_time(track: DipTrack, healing: float, tol: float, t_min: float) -> float | None:
    """First time after ``t_min`` when a well-separated dip changes depth by
    more than ``tol`` or extra dips appear and persist."""
    init = track.depths[0]
    sep = track.separation()
    far = sep > 4.0 * healing
    extra = track.counts > track.n_dips
    for i, t in enumerate(track.times):
        if t < t_min:
            continue
        if far[i] and np.nanmax(np.abs(track.depths[i] - init)) > tol:
            return float(t)
        if extra[i] and np.all(extra[i:i + 5]):
            return float(t)
    return None


def core_depth(series: TimeSeries, x_c: float, radius: float) -> np.ndarray:
    """Minimum of |psi1|^2 within ``radius`` of ``x_c`` in every frame."""
    sel = np.abs(series.grid.x - x_c) <= radius
    return np.min(np.abs(series.psi1[:, sel]) ** 2, axis=1)


def _collision_site(track: DipTrack, approach: int) -> float:
    i = approach
    while i > 0 and not track.complete[i]:
        i -= 1
    return float(np.nanmean(track.positions[i]))


def classify(track: DipTrack, speeds, healing=1.0, background=1.0,
             series: TimeSeries | None = None) -> tuple[str, list]:
    """Outcome of a two-dip interaction from its track.

    ``speeds`` are the initial velocities of the left and right dips and
    ``background`` the far-field density. Only frames before a detected
    break-up enter the interaction analysis; a break-up before the
    interaction has played out is itself the outcome. With ``series``
    the density at the collision site is also examined: a dip there that
    re-forms at least three times after closest approach is a breather,
    even if the pair never separates into trackable minima. Returns the
    label and a list of ``(time, event)`` pairs.
    """
    events = list(track.events)
    if track.n_dips != 2 or not np.any(track.complete):
        return "indeterminate", events
    t = track.times
    t_break = _breakup_time(track, healing, 0.25 * background, t_min=0.0)
    if t_break is not None:
        events.append((t_break, "break-up"))
    end = t_break if t_break is not None else t[-1]
    live = t <= end
    sep = track.separation()
    approach = int(np.nanargmin(np.where(live, sep, np.inf)))
    t_close = float(t[approach])
    events.append((t_close, f"closest approach {sep[approach]:.4g}"))

    if series is not None:
        site = _collision_site(track, approach)
        core = core_depth(series, site, 3.0 * healing)[t > t_close]
        pulses, _ = find_peaks(-core, prominence=0.25 * background)
        if len(pulses) >= 3:
            events.append((float(t[t > t_close][pulses[0]]), f"bound state at x={site:.3g}"))
            return "breather", events

    after = (t > t_close) & live
    if after.sum() < 10:
        return ("break-up" if t_break is not None else "indeterminate"), events

    s_after = sep[after]
    peaks, _ = find_peaks(s_after, prominence=2.0 * track.dx)
    if len(peaks) >= 3 and s_after[-1] < 0.75 * sep[0]:
        return "breather", events

    ok = track.complete & live
    diff = track.positions[ok, 1] - track.positions[ok, 0]
    if diff.size and np.sign(diff[0]) != np.sign(diff[-1]):
        return "transmit", events

    if np.nanmin(sep[live]) < 2.0 * track.dx:
        return "indeterminate", events

    v0 = np.asarray(speeds, dtype=float)
    span = max(0.2 * (end - t_close), 5.0 * (t[1] - t[0]))
    v1 = np.array([track.velocity(j, end - span, end) for j in range(2)])
    if np.any(np.isnan(v1)):
        return "indeterminate", events
    vmax = np.max(np.abs(v0))
    static = np.abs(v0) < 0.05 * max(vmax, 1e-12)
    if static.sum() == 1 and vmax > 0:
        mover = int(np.argmax(np.abs(v0)))
        rest = 1 - mover
        # the mover stalls and the partner leaves in the mover's direction
        if abs(v1[mover]) < 0.3 * vmax and v1[rest] * v0[mover] > 0.5 * vmax**2:
            return "energy-exchange", events
    if v1[1] - v1[0] > 0:
        return "repel", events
    return "indeterminate", events


def collision_experiment(spec_left: SolitonSpec, spec_right: SolitonSpec, parity,
                         params: ModelParams, grid: Grid,
                         settings: EvolveSettings | None = None, window=None) -> CollisionResult:
    """Splice two solitons, evolve, track the dips and classify the outcome."""
    if spec_left.x0 >= spec_right.x0:
        raise DomainError("spec_left must sit to the left of spec_right")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpliceWarning)
        init = splice([spec_left, spec_right], params, grid, parity)
    series = evolve(init, params, grid, settings)
    track = track_dips(series, grid, 2, window=window)
    bg = params.background
    speeds = [_speed(s, bg) for s in (spec_left, spec_right)]
    outcome, events = classify(track, speeds, healing=1.0 / bg, background=bg**2, series=series)
    events += [(0.0, flag) for flag in series.flags]
    return CollisionResult(track, outcome, events, series, init)


def _speed(spec: SolitonSpec, background: float) -> float:
    """Lab-frame speed: the dark-soliton v parameter scales with the background."""
    return spec.v if spec.kind == "FA" else background * spec.v
