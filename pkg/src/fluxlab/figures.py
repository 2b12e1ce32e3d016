"""One-shot recipes that regenerate the data behind each figure.

``run_figure("1a", out)`` writes CSVs, SVGs, a ``summary.txt`` with the
quantities the figure is judged by, and a manifest into
``out/figure-1a``. A bare number runs every panel of that figure.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .ansatz import SolitonSpec, SpliceWarning, splice
from .cli import Config, profile_plot, save_evolution, write_manifest
from .core import Grid, ModelParams, field_to_csv
from .dynamics import EvolveSettings, collision_experiment, evolve, instability_summary, track_dips
from .errors import DomainError
from .particle import ParticleState, frequency_csv, frequency_sweep, integrate_particles
from .spectrum import spectrum_of, stability_sweep
from .stationary import (branch_point, continue_in_k, dark_pair_state, travelling_fa,
                         two_fa_state)

FREE_GRID = dict(half_width=50.0, dx=0.1)
TRAP_GRID = dict(half_width=30.0, dx=0.2)
# seeds for the instabilities: rounding-level for spliced free-space data,
# larger for Newton-computed trapped states (see instability timing)
NOISE = 1e-14
TRAP_NOISE = 1e-6
TRAP_WINDOW = (-12.0, 12.0)


@dataclass(frozen=True)
class Collision:
    kind: str
    k: float
    left: tuple  # (x0, lab speed)
    right: tuple
    t_end: float
    parity: str | None = None
    noise: float = 0.0


COLLISIONS = {
    "1a": Collision("dark", 0.0, (-6, 0.1), (6, -0.1), 120),
    "1b": Collision("dark", 0.0, (-15, 0.6), (15, -0.6), 50),
    "1c": Collision("dark", 0.0, (-10, 0.5), (10, 0.0), 60),
    "2a": Collision("dark", 0.1, (-6, 0.2), (6, -0.2), 200, noise=NOISE),
    "2b": Collision("dark", 0.1, (-15, 0.6), (15, -0.6), 50, noise=NOISE),
    "2c": Collision("dark", 0.1, (-10, 0.5), (10, 0.0), 60, noise=NOISE),
    "5a": Collision("FA", 0.1, (-10, 0.2), (10, -0.2), 150, "odd", NOISE),
    "5b": Collision("FA", 0.1, (-15, 0.6), (15, -0.6), 60, "odd", NOISE),
    "6a": Collision("FA", 0.1, (-10, 0.1), (10, -0.1), 200, "even", NOISE),
    "6b": Collision("FA", 0.1, (-10, 0.2), (10, -0.2), 150, "even", NOISE),
    "6c": Collision("FA", 0.1, (-15, 0.6), (15, -0.6), 60, "even", NOISE),
    "7a": Collision("FA", 0.1, (-15, 0.2), (5, 0.0), 150, "odd", NOISE),
    "7b": Collision("FA", 0.1, (-15, 0.6), (5, 0.0), 60, "odd", NOISE),
    "8a": Collision("FA", 0.1, (-15, 0.2), (5, 0.0), 150, "even", NOISE),
    "8b": Collision("FA", 0.1, (-15, 0.6), (5, 0.0), 60, "even", NOISE),
}

PANELS = {"1": "abc", "2": "abc", "5": "ab", "6": "abc", "7": "ab", "8": "ab"}


def _grid(spec) -> Grid:
    return Grid.symmetric(spec["half_width"], spec["dx"], 2)


def _spec(kind, x0, speed, bg):
    return SolitonSpec(kind, float(x0), speed if kind == "FA" else speed / bg)


def _summary(path: Path, items: dict):
    lines = [f"{k} = {v}" for k, v in items.items()]
    (path / "summary.txt").write_text("\n".join(lines) + "\n")


def collision_result(fid: str):
    """Run the collision behind panel ``fid``; returns (result, grid)."""
    c = COLLISIONS[fid]
    params, grid = ModelParams(1.0, c.k, 0.0), _grid(FREE_GRID)
    bg = params.background
    left, right = _spec(c.kind, *c.left, bg), _spec(c.kind, *c.right, bg)
    res = collision_experiment(left, right, c.parity, params, grid,
                               EvolveSettings(t_end=c.t_end, noise=c.noise))
    return res, grid


def _collision(fid, out: Path, **_):
    c = COLLISIONS[fid]
    res, grid = collision_result(fid)
    bg = ModelParams(1.0, c.k, 0.0).background
    overlays = None
    if c.kind == "dark":
        # reduced model started from the same positions and speeds
        try:
            traj = integrate_particles(ParticleState([c.left[0], c.right[0]], [c.left[1], c.right[1]]),
                                       c.t_end, bg ** 2)
            traj.to_csv(out / "particle.csv")
            overlays = [(f"particle {j}", traj.positions[:, j], traj.times) for j in range(2)]
        except DomainError:
            overlays = None
    files = save_evolution(out, res.series, res.track, overlays, title=f"figure {fid}")
    if overlays:
        files.append("particle.csv")
    _summary(out, {"outcome": res.outcome,
                   "events": "; ".join(f"{t:.4g} {e}" for t, e in sorted(res.events, key=lambda e: e[0]))})
    return files, grid, {"outcome": res.outcome}


def _fig3(out: Path, **_):
    params, grid = ModelParams(1.0, 0.1, 0.0), Grid.symmetric(30.0, 0.1, 2)
    state = travelling_fa(params, grid, 0.2)
    field_to_csv(state, grid, out / "profile.csv")
    profile_plot(out / "profile.svg", grid, state, "travelling FA v=0.2, k=0.1")
    rho = np.abs(state.psi1) ** 2, np.abs(state.psi2) ** 2
    _summary(out, {"min_rho1": float(rho[0].min()), "min_rho2": float(rho[1].min())})
    return ["profile.csv", "profile.svg"], grid, {}


def _fig4(out: Path, **_):
    params, grid = ModelParams(1.0, 0.1, 0.0), _grid(FREE_GRID)
    specs = [SolitonSpec("FA", -10.0, 0.2), SolitonSpec("FA", 10.0, -0.2)]
    files = []
    for parity in ("odd", "even"):
        state = splice(specs, params, grid, parity)
        field_to_csv(state, grid, out / f"{parity}.csv")
        profile_plot(out / f"{parity}.svg", grid, state, f"{parity} pair, v = +-0.2")
        files += [f"{parity}.csv", f"{parity}.svg"]
    return files, grid, {}


def _trapped(parity, k):
    params, grid = ModelParams(1.0, k, 0.1), _grid(TRAP_GRID)
    if parity == "dark":
        return dark_pair_state(params, grid), params, grid
    return two_fa_state(params, grid, parity), params, grid


def _profile_fig(parity, k, title):
    def run(out: Path, **_):
        state, params, grid = _trapped(parity, k)
        field_to_csv(state, grid, out / "state.csv")
        profile_plot(out / "state.svg", grid, state, title)
        return ["state.csv", "state.svg"], grid, {}
    return run


def _spectrum_fig(parity, k):
    def run(out: Path, **_):
        state, params, grid = _trapped(parity, k)
        spec = spectrum_of(state, params, grid)
        spec.to_csv(out / "spectrum.csv")
        lam = spec.eigenvalues
        plots.scatter_plot(out / "spectrum.svg", lam.real, lam.imag, "Re lambda", "Im lambda")
        _summary(out, {"max_im": spec.max_im, "max_unstable": spec.max_unstable,
                       "n_unstable": len(spec.unstable_eigenvalues)})
        return ["spectrum.csv", "spectrum.svg"], grid, {"max_im": spec.max_im}
    return run


def _march(state, params, grid, k0, k1, dk=0.01):
    seed = branch_point(state, params.with_k(k0), grid)
    return continue_in_k(seed, (k0, k1), dk, params.with_k(k0), grid)


def trapped_sweep(parity, k_seed, k_hi=0.5, k_lo=0.1, workers=1):
    """Continue a trapped pair from ``k_seed`` both ways and sweep its stability.

    Returns the upward branch (which carries k_ce), the ascending sweep,
    the model parameters at the seed and the grid.
    """
    state, params, grid = _trapped(parity, k_seed)
    up = _march(state, params, grid, k_seed, k_hi)
    down = _march(state, params, grid, k_seed, k_lo)
    pts = sorted(list(down)[1:] + list(up), key=lambda p: p.k)
    return up, stability_sweep(pts, params, grid, workers), params, grid


def _sweep_fig(parity, k_seed, k_hi=0.5, k_lo=0.1):
    def run(out: Path, workers=1, **_):
        up, fa, params, grid = trapped_sweep(parity, k_seed, k_hi, k_lo, workers)
        fa.to_csv(out / "sweep.csv")
        dstate, _, _ = _trapped("dark", 0.5)
        dark = stability_sweep(_march(dstate, params, grid, 0.5, k_lo), params, grid, workers)
        dark.to_csv(out / "dark_sweep.csv")
        series = {"FA max Im": (fa.k, fa.max_im), "dark max Im": (dark.k, dark.max_im)}
        dashes = {"dark max Im": "6,4"}
        results = {"k_ce": up.k_ce, "k_cs": fa.k_cs, "k_stable_onward": fa.k_stable_onward,
                   "windows": fa.windows()}
        files = ["sweep.csv", "dark_sweep.csv", "sweep.svg"]
        if parity == "odd":
            bdg = dict(zip(fa.k.round(12), fa.max_im))
            ks = [round(float(k), 12) for k in fa.k if k > 0.2 + 1e-9]
            rows = frequency_sweep(ks, params.rho0, params.omega, bdg)
            frequency_csv(rows, out / "frequencies.csv")
            series["omega_out"] = ([r.k for r in rows], [r.omega_out for r in rows])
            dashes["omega_out"] = "2,3"
            files.append("frequencies.csv")
        else:
            series["FA Re of max"] = (fa.k, fa.re_of_max)
            dashes["FA Re of max"] = "6,3,2,3"
        plots.line_plot(out / "sweep.svg", None, series, xlabel="k", ylabel="growth rate",
                        dashes=dashes)
        _summary(out, results)
        return files, grid, results
    return run


def trapped_evolution(parity, k, t_end=200.0):
    """Evolve the seeded trapped pair and track its two cores."""
    state, params, grid = _trapped(parity, k)
    series = evolve(state, params, grid, EvolveSettings(t_end=t_end, noise=TRAP_NOISE))
    return series, track_dips(series, grid, 2, window=TRAP_WINDOW), grid


def _evolution_fig(parity, k, t_end=200.0):
    def run(out: Path, **_):
        series, track, grid = trapped_evolution(parity, k, t_end)
        files = save_evolution(out, series, track, title=f"{parity} pair, k={k}")
        s = instability_summary(track)
        res = {"onset": s.onset, "breakup": s.breakup, "oscillations": s.oscillations}
        _summary(out, res)
        return files, grid, res
    return run


RECIPES = {
    "3": _fig3,
    "4": _fig4,
    "9": _profile_fig("odd", 0.2, "(+-) pair, k=0.2"),
    "10": _profile_fig("dark", 0.5, "dark pair, k=0.5"),
    "11": _spectrum_fig("odd", 0.2),
    "12": _sweep_fig("odd", 0.2),
    "13": _evolution_fig("odd", 0.2),
    "14": _profile_fig("even", 0.25, "(++) pair, k=0.25"),
    "15": _spectrum_fig("even", 0.25),
    "16": _sweep_fig("even", 0.1),
    "17": _evolution_fig("even", 0.1),
}
for _fid in COLLISIONS:
    RECIPES[_fid] = (lambda f: lambda out, **kw: _collision(f, out, **kw))(_fid)


def figure_ids(which: str) -> list[str]:
    which = str(which).strip().lower()
    if which in PANELS:
        return [which + p for p in PANELS[which]]
    if which in RECIPES:
        return [which]
    raise DomainError(f"unknown figure {which!r}; choose 1-17 (panels like 1a)")


def run_figure(which: str, out: Path, workers: int = 1) -> dict:
    results = {}
    for fid in figure_ids(which):
        target = Path(out) / f"figure-{fid}"
        target.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpliceWarning)
            files, grid, res = RECIPES[fid](target, workers=workers)
        write_manifest(target, f"figure {fid}", Config(figure=fid, workers=workers), files, grid, res)
        print(f"figure {fid}: " + ", ".join(f"{k}={v}" for k, v in res.items()))
        results[fid] = res
    return results
