"""Command-line driver: ``fluxlab <command> [--config FILE] [--key value ...]``.

Every option can be given in a config file of ``key = value`` lines,
optionally grouped under ``[section]`` headers (sections only organise
the file; keys are global). Command-line flags carry the same names and
override the file. Each run writes CSV data, SVG plots and a
``manifest.txt`` into ``--out``.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import platform
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from . import plots
from .ansatz import (SolitonSpec, SpliceWarning, dark_profile, fa_profile, travelling_dark,
                     trapped_guess, two_soliton_exact)
from .core import Grid, ModelParams, PairField, field_to_csv, observables
from .dynamics import (EvolveSettings, collision_experiment, evolve, instability_summary,
                       track_dips)
from .errors import BlowUpError, ConvergenceError, DomainError, FluxlabError
from .particle import (ParticleState, fa_fixed_point, frequency_csv, frequency_sweep,
                       integrate_particles)
from .spectrum import spectrum_of, stability_sweep
from .stationary import (branch_point, continue_in_k, dark_pair_state, newton_stationary,
                         travelling_fa, two_fa_state)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(FluxlabError):
    pass


# ---------------------------------------------------------------------------
# options

def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


@dataclass(frozen=True)
class Option:
    type: object
    default: object
    help: str


OPTIONS = {
    # model
    "rho0": Option(float, 1.0, "background density parameter"),
    "k": Option(float, 0.0, "linear coupling"),
    "omega": Option(float, 0.0, "trap frequency"),
    # grid
    "x_min": Option(float, -60.0, "left domain end"),
    "x_max": Option(float, 60.0, "right domain end"),
    "dx": Option(float, 0.2, "grid spacing"),
    "order": Option(int, 2, "stencil order (2 or 4)"),
    # states
    "state": Option(str, "FA", "FA, dark, pair or dark_pair"),
    "kind": Option(str, "FA", "FA, dark, travelling_dark, travelling_fa or two_soliton"),
    "parity": Option(str, "odd", "pair configuration: odd (+-) or even (++)"),
    "separation": Option(float, None, "initial core separation of a pair"),
    "x0": Option(float, 0.0, "soliton position"),
    "v": Option(float, 0.0, "soliton velocity"),
    "t": Option(float, 0.0, "time at which to evaluate a two-soliton solution"),
    "sign_re": Option(int, 1, "sign of the real part"),
    "sign_im": Option(int, 1, "sign of the imaginary part"),
    "tol": Option(float, 1e-10, "Newton tolerance"),
    # continuation
    "k_start": Option(float, None, "first k of a branch (defaults to k)"),
    "k_end": Option(float, 0.5, "last k of a branch"),
    "dk": Option(float, 0.01, "continuation step"),
    "workers": Option(int, 1, "threads for eigenvalue sweeps"),
    # dynamics
    "t_end": Option(float, 100.0, "final time"),
    "dt": Option(float, None, "time step (default 0.1 dx^2)"),
    "record_every": Option(int, None, "steps between stored frames"),
    "noise": Option(float, 0.0, "amplitude of seeded initial noise"),
    "seed": Option(int, 0, "noise seed"),
    "window": Option(_floats, None, "x range for dip detection, 'a,b'"),
    "solitons": Option(str, "", "collision specs 'kind@x0:v, ...' (v is the lab speed)"),
    # particle model
    "fixed_point": Option(_bool, False, "report the trapped pair equilibrium and frequencies"),
    "frequency_sweep": Option(_bool, False, "tabulate pair frequencies over k_start..k_end"),
    "positions": Option(_floats, [-10.0, 10.0], "initial dip positions"),
    "velocities": Option(_floats, [0.1, -0.1], "initial dip velocities"),
    "frozen": Option(_bool, False, "hold dip depths at their initial values"),
    # output
    "out": Option(str, "fluxlab-out", "output directory"),
}

COMMON = ("rho0", "k", "omega", "x_min", "x_max", "dx", "order", "out")
STATE = ("state", "parity", "separation", "x0", "tol")
EVOLVE = ("t_end", "dt", "record_every", "noise", "seed", "window")
COMMAND_KEYS = {
    "profile": COMMON + ("kind", "x0", "v", "t", "sign_re", "sign_im"),
    "stationary": COMMON + STATE,
    "continue": COMMON + STATE + ("k_start", "k_end", "dk"),
    "spectrum": COMMON + STATE,
    "sweep": COMMON + STATE + ("k_start", "k_end", "dk", "workers"),
    "evolve": COMMON + STATE + EVOLVE,
    "collide": COMMON + ("solitons", "parity") + EVOLVE,
    "particle": ("rho0", "k", "omega", "out", "fixed_point", "frequency_sweep", "positions",
                 "velocities", "frozen", "t_end", "k_start", "k_end", "dk"),
    "figure": ("out", "workers"),
}
HELP = {
    "profile": "write a closed-form or travelling solution",
    "stationary": "Newton solve for a stationary state",
    "continue": "continue a branch in k and report k_ce",
    "spectrum": "linear stability spectrum of one state",
    "sweep": "stability along a branch: windows and k_cs",
    "evolve": "time evolution with dip tracking",
    "collide": "two-soliton collision and its outcome",
    "particle": "reduced particle model: trajectories, fixed point, frequencies",
    "figure": "regenerate the data behind a numbered figure",
}


class Config(dict):
    """Resolved options with attribute access."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None


def read_config(path) -> dict:
    """Flat ``key: raw string`` mapping from a key=value file with optional sections."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out, where = {}, {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.strip().replace("-", "_")
            if key in out:
                raise ConfigError(f"{path}: key '{key}' given in both [{where[key]}] and [{section}]")
            out[key] = value
            where[key] = section
    return out


def resolve(command: str, raw_file: dict, raw_flags: dict) -> Config:
    allowed = COMMAND_KEYS[command]
    for key in raw_file:
        if key not in OPTIONS:
            raise ConfigError(f"unknown config key '{key}'")
        if key not in allowed:
            print(f"note: config key '{key}' is not used by '{command}'", file=sys.stderr)
    cfg = Config()
    for key in allowed:
        opt = OPTIONS[key]
        raw = raw_flags.get(key)
        if raw is None:
            raw = raw_file.get(key)
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")
                           and opt.type is not str):
            cfg[key] = opt.default
            continue
        try:
            cfg[key] = opt.type(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"field '{key}': cannot parse {raw!r} ({exc})") from None
    return cfg


# ---------------------------------------------------------------------------
# shared helpers

def model(cfg) -> ModelParams:
    return ModelParams(cfg.rho0, cfg.k, cfg.omega)


def grid_of(cfg) -> Grid:
    if not cfg.dx > 0:
        raise ConfigError("field 'dx': must be positive")
    return Grid.from_spacing(cfg.x_min, cfg.x_max, cfg.dx, cfg.order)


def outdir(cfg) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_manifest(path: Path, command: str, cfg, files, grid: Grid | None = None, extra=None):
    lines = [f"command = {command}", f"fluxlab = {__version__}", f"backend = {kernels.BACKEND}",
             f"python = {platform.python_version()}", f"numpy = {np.__version__}",
             f"scipy = {scipy.__version__}", "", "[config]"]
    lines += [f"{k} = {_show(v)}" for k, v in sorted(cfg.items())]
    if grid is not None:
        lines += ["", "[grid]", f"x_min = {grid.x_min!r}", f"x_max = {grid.x_max!r}",
                  f"n = {grid.n}", f"dx = {grid.dx!r}", f"stencil_order = {grid.stencil_order}"]
    if extra:
        lines += ["", "[results]"] + [f"{k} = {_show(v)}" for k, v in extra.items()]
    lines += ["", "[files]"] + sorted(str(f) for f in files)
    (path / "manifest.txt").write_text("\n".join(lines) + "\n")


def _show(v):
    if isinstance(v, (list, tuple)) and all(isinstance(a, (int, float)) for a in v):
        return ",".join(repr(float(a)) for a in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def build_state(cfg, params: ModelParams, grid: Grid) -> PairField:
    """Stationary state named by ``cfg.state``."""
    from .stationary import NewtonSettings
    settings = NewtonSettings(tol=cfg.tol)
    kind = cfg.state
    if kind in ("FA", "dark"):
        spec = SolitonSpec(kind, cfg.x0)
        if params.omega > 0:
            guess = trapped_guess([spec], params, grid)
        elif kind == "FA":
            guess = fa_profile(grid, params, x0=cfg.x0)
        else:
            guess = dark_profile(grid, params, x0=cfg.x0)
        return newton_stationary(guess, params, grid, settings)
    if kind == "pair":
        return two_fa_state(params, grid, cfg.parity, cfg.separation, settings)
    if kind == "dark_pair":
        return dark_pair_state(params, grid, cfg.separation, settings)
    raise ConfigError(f"field 'state': expected FA, dark, pair or dark_pair, got {kind!r}")


def parse_solitons(text: str, params: ModelParams):
    """``kind@x0:v`` items; v is the lab-frame speed."""
    specs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            kind, rest = item.split("@")
            x0, v = rest.split(":")
            x0, v = float(x0), float(v)
        except ValueError:
            raise ConfigError(f"field 'solitons': cannot parse {item!r}; expected kind@x0:v") from None
        if kind != "FA":
            v = v / params.background
        specs.append(SolitonSpec(kind.strip(), x0, v))
    if len(specs) != 2:
        raise ConfigError("field 'solitons': exactly two solitons are needed")
    return sorted(specs, key=lambda s: s.x0)


def settings_of(cfg) -> EvolveSettings:
    return EvolveSettings(t_end=cfg.t_end, dt=cfg.dt, record_every=cfg.record_every,
                          noise=cfg.noise, seed=cfg.seed)


def _window(cfg):
    if cfg.window is None:
        return None
    if len(cfg.window) != 2:
        raise ConfigError("field 'window': expected two numbers 'a,b'")
    return tuple(cfg.window)


def _density_map(series):
    return np.abs(series.psi1) ** 2


def _thin(series, max_frames=400, max_points=600):
    return max(1, len(series) // max_frames), max(1, series.grid.n // max_points)


def save_evolution(out: Path, series, track, overlays=None, title=""):
    every, x_every = _thin(series)
    series.density_csv(out / "density.csv", every, x_every)
    track.to_csv(out / "dips.csv")
    if overlays is None:
        overlays = [(f"dip {j}", track.positions[:, j], track.times) for j in range(track.n_dips)]
    plots.heatmap(out / "density.svg", series.grid.x, series.times, _density_map(series),
                  overlays=overlays, title=title)
    return ["density.csv", "dips.csv", "density.svg"]


def profile_plot(path, grid, state, title=""):
    plots.line_plot(path, grid.x, {"Re psi1": state.psi1.real, "Im psi1": state.psi1.imag,
                                   "Re psi2": state.psi2.real, "Im psi2": state.psi2.imag},
                    xlabel="x", title=title, dashes={"Re psi2": "5,3", "Im psi2": "5,3"})


# ---------------------------------------------------------------------------
# commands

def cmd_profile(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    kind = cfg.kind
    if kind == "FA":
        state = fa_profile(grid, params, cfg.sign_re, cfg.sign_im, cfg.x0)
    elif kind == "dark":
        state = dark_profile(grid, params, cfg.x0, cfg.sign_re)
    elif kind == "travelling_dark":
        state = PairField.single(travelling_dark(grid, params.rho0 + params.k,
                                                 cfg.v / params.background, cfg.x0))
    elif kind == "travelling_fa":
        state = travelling_fa(params, grid, cfg.v, cfg.x0)
    elif kind == "two_soliton":
        state = PairField.single(two_soliton_exact(grid, cfg.t, params.rho0, params.rho0 * cfg.v ** 2))
    else:
        raise ConfigError(f"field 'kind': unknown profile {kind!r}")
    field_to_csv(state, grid, out / "profile.csv")
    profile_plot(out / "profile.svg", grid, state, kind)
    obs = observables(state, params, grid)
    print(f"{kind}: norm={obs.norm:.10g} energy={obs.energy:.10g}")
    write_manifest(out, "profile", cfg, ["profile.csv", "profile.svg"], grid)
    return EXIT_OK


def cmd_stationary(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    state = build_state(cfg, params, grid)
    pt = branch_point(state, params, grid)
    field_to_csv(state, grid, out / "state.csv")
    profile_plot(out / "state.svg", grid, state, f"{cfg.state} k={params.k}")
    print(f"residual={pt.residual:.3e} imag_amplitude={pt.imag_amplitude:.10g}")
    write_manifest(out, "stationary", cfg, ["state.csv", "state.svg"], grid,
                   {"residual": pt.residual, "imag_amplitude": pt.imag_amplitude})
    return EXIT_OK


def _branch(cfg, params, grid):
    k0 = cfg.k if cfg.k_start is None else cfg.k_start
    p0 = params.with_k(k0)
    seed = branch_point(build_state(cfg, p0, grid), p0, grid)
    return continue_in_k(seed, (k0, cfg.k_end), cfg.dk, p0, grid), p0


def _branch_csv(branch, path):
    rows = ["k,imag_amplitude,residual"]
    rows += [f"{p.k!r},{p.imag_amplitude!r},{p.residual!r}" for p in branch]
    Path(path).write_text("\n".join(rows) + "\n")


def cmd_continue(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    branch, _ = _branch(cfg, params, grid)
    _branch_csv(branch, out / "branch.csv")
    plots.line_plot(out / "branch.svg", branch.k, {"imag amplitude": branch.imag_amplitude},
                    xlabel="k", ylabel="max |Im psi|")
    print(f"points={len(branch)} k_ce={branch.k_ce}")
    if branch.diagnostic:
        print(branch.diagnostic, file=sys.stderr)
    write_manifest(out, "continue", cfg, ["branch.csv", "branch.svg"], grid, {"k_ce": branch.k_ce})
    return EXIT_OK


def cmd_spectrum(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    state = build_state(cfg, params, grid)
    spec = spectrum_of(state, params, grid)
    spec.to_csv(out / "spectrum.csv")
    lam = spec.eigenvalues
    plots.scatter_plot(out / "spectrum.svg", lam.real, lam.imag, "Re lambda", "Im lambda")
    print(f"max_im={spec.max_im:.6g} stable={spec.stable} symmetry_ok={spec.symmetry_ok}")
    write_manifest(out, "spectrum", cfg, ["spectrum.csv", "spectrum.svg"], grid,
                   {"max_im": spec.max_im, "stable": spec.stable})
    return EXIT_OK


def cmd_sweep(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    branch, p0 = _branch(cfg, params, grid)
    sweep = stability_sweep(branch, p0, grid, cfg.workers)
    sweep.to_csv(out / "sweep.csv")
    plots.line_plot(out / "sweep.svg", sweep.k, {"max Im": sweep.max_im, "Re of max": sweep.re_of_max},
                    xlabel="k", dashes={"Re of max": "6,3,2,3"})
    print(f"k_ce={branch.k_ce} k_cs={sweep.k_cs} k_stable_onward={sweep.k_stable_onward}")
    print("stable  k_from  k_to")
    for stable, a, b in sweep.windows():
        print(f"{'yes' if stable else 'no ':6}  {a:6.3f}  {b:6.3f}")
    write_manifest(out, "sweep", cfg, ["sweep.csv", "sweep.svg"], grid,
                   {"k_ce": branch.k_ce, "k_cs": sweep.k_cs, "k_stable_onward": sweep.k_stable_onward})
    return EXIT_OK


def cmd_evolve(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    state = build_state(cfg, params, grid)
    series = evolve(state, params, grid, settings_of(cfg))
    track = track_dips(series, grid, 2, window=_window(cfg))
    files = save_evolution(out, series, track)
    s = instability_summary(track)
    print(f"onset={s.onset} breakup={s.breakup} oscillations={s.oscillations}")
    for flag in series.flags:
        print(f"warning: {flag}", file=sys.stderr)
    write_manifest(out, "evolve", cfg, files, grid,
                   {"onset": s.onset, "breakup": s.breakup, "oscillations": s.oscillations})
    return EXIT_OK


def cmd_collide(cfg) -> int:
    params, grid, out = model(cfg), grid_of(cfg), outdir(cfg)
    left, right = parse_solitons(cfg.solitons, params)
    res = collision_experiment(left, right, cfg.parity, params, grid, settings_of(cfg), _window(cfg))
    files = save_evolution(out, res.series, res.track)
    print(f"outcome={res.outcome}")
    for t, e in sorted(res.events, key=lambda e: e[0]):
        print(f"  t={t:.4g} {e}")
    write_manifest(out, "collide", cfg, files, grid, {"outcome": res.outcome})
    return EXIT_OK


def cmd_particle(cfg) -> int:
    out = outdir(cfg)
    if cfg.fixed_point:
        m = fa_fixed_point(cfg.k, cfg.rho0, cfg.omega)
        w_in, w_out = m.frequencies()
        print(f"x_tilde={m.x_tilde:.10g} omega_in={w_in.value:.10g}"
              f"{' (growth rate)' if w_in.imaginary else ''} omega_out={w_out.value:.10g}"
              f"{' (growth rate)' if w_out.imaginary else ''}")
        write_manifest(out, "particle", cfg, [], None,
                       {"x_tilde": m.x_tilde, "omega_in": w_in.value, "omega_out": w_out.value})
        return EXIT_OK
    if cfg.frequency_sweep:
        k0 = cfg.k if cfg.k_start is None else cfg.k_start
        n = int(np.floor((cfg.k_end - k0) / cfg.dk + 1e-9)) + 1
        ks = [round(k0 + i * cfg.dk, 12) for i in range(n)]
        rows = frequency_sweep(ks, cfg.rho0, cfg.omega)
        frequency_csv(rows, out / "frequencies.csv")
        plots.line_plot(out / "frequencies.svg", ks, {"omega_in": [r.omega_in for r in rows],
                                                       "omega_out": [r.omega_out for r in rows]},
                        xlabel="k")
        write_manifest(out, "particle", cfg, ["frequencies.csv", "frequencies.svg"])
        return EXIT_OK
    state = ParticleState(cfg.positions, cfg.velocities)
    trap = 2.0 * (1 - 5 * cfg.k) / (1 + cfg.k) * cfg.omega ** 2 if cfg.omega else 0.0
    traj = integrate_particles(state, cfg.t_end, cfg.rho0, frozen=cfg.frozen, trap=trap)
    traj.to_csv(out / "trajectory.csv")
    plots.line_plot(out / "trajectory.svg", traj.times,
                    {f"x_{i + 1}": traj.positions[:, i] for i in range(state.n)}, xlabel="t")
    print(f"min separation={traj.separation().min():.6g}")
    write_manifest(out, "particle", cfg, ["trajectory.csv", "trajectory.svg"])
    return EXIT_OK


def cmd_figure(cfg, which: str) -> int:
    from .figures import run_figure
    run_figure(which, Path(cfg.out), workers=cfg.workers)
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile, "stationary": cmd_stationary, "continue": cmd_continue,
    "spectrum": cmd_spectrum, "sweep": cmd_sweep, "evolve": cmd_evolve,
    "collide": cmd_collide, "particle": cmd_particle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fluxlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMAND_KEYS.items():
        p = sub.add_parser(name, help=HELP[name])
        if name == "figure":
            p.add_argument("figure", help="figure id: 1-17, optionally with a panel letter (1a)")
        p.add_argument("--config", help="key = value config file")
        for key in keys:
            opt = OPTIONS[key]
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            if opt.type is _bool:
                p.add_argument(*flags, dest=key, nargs="?", const="true", default=None,
                               help=opt.help)
            else:
                p.add_argument(*flags, dest=key, default=None, metavar="VALUE",
                               help=f"{opt.help} (default {_show(opt.default)})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw_file = read_config(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items()
                 if k in OPTIONS and v is not None}
        cfg = resolve(args.command, raw_file, flags)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SpliceWarning)
            if args.command == "figure":
                return cmd_figure(cfg, args.figure)
            return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, BlowUpError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostic", "")
        if diag:
            print(f"  {diag}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
