"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 501 1001 2001] [--steps 200]

Reports microseconds per call for the Laplacian and right-hand side and
per RK4 step, plus the largest difference between the two backends.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fluxlab import kernels


def _state(n, rng):
    x = np.linspace(-40, 40, n)
    psi1 = np.tanh(x) + 0.3j / np.cosh(x) + 1e-3 * rng.standard_normal(n)
    psi2 = np.conj(psi1)
    pot = 0.5 * 0.01 * x**2
    return psi1, psi2, pot, x[1] - x[0]


def _time(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=3)) / number


def bench(n, steps, order=2):
    rng = np.random.default_rng(0)
    p1, p2, pot, dx = _state(n, rng)
    rows = {}
    outputs = {}
    for name in ("python", "cython"):
        try:
            be = kernels.get_backend(name)
        except ImportError:
            continue
        dt = 0.1 * dx * dx
        rows[name] = (
            1e6 * _time(lambda: be.laplacian(p1, dx, order), 200),
            1e6 * _time(lambda: be.gpe_rhs(p1, p2, pot, 1.0, 0.1, dx, order), 200),
            1e6 * _time(lambda: be.rk4_steps(p1, p2, pot, 1.0, 0.1, dx, order, dt, steps), 1) / steps,
        )
        outputs[name] = be.rk4_steps(p1, p2, pot, 1.0, 0.1, dx, order, dt, steps)
    diff = float("nan")
    if len(outputs) == 2:
        a, b = outputs["python"], outputs["cython"]
        diff = max(np.max(np.abs(a[0] - b[0])), np.max(np.abs(a[1] - b[1])))
    return rows, diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[501, 1001, 2001])
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--order", type=int, default=2, choices=(2, 4))
    args = ap.parse_args(argv)
    print(f"{'n':>6} {'backend':>8} {'laplacian us':>13} {'rhs us':>9} {'rk4 us/step':>12} {'speedup':>8}")
    for n in args.sizes:
        rows, diff = bench(n, args.steps, args.order)
        base = rows.get("python", (np.nan,) * 3)[2]
        for name, (lap, rhs, step) in rows.items():
            print(f"{n:>6} {name:>8} {lap:13.1f} {rhs:9.1f} {step:12.1f} {base / step:8.2f}")
        print(f"{n:>6} max |python - cython| after {args.steps} steps: {diff:.2e}")


if __name__ == "__main__":
    main()
