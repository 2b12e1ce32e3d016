import os
import subprocess
import sys

import numpy as np
import pytest

from fluxlab import kernels

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None
needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _state(n=301, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(-15, 15, n)
    psi1 = np.tanh(x) + 0.4j / np.cosh(x) + 1e-2 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    psi2 = np.tanh(x - 1) - 0.4j / np.cosh(x - 1)
    return psi1, psi2, 0.005 * x ** 2, x[1] - x[0]


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_ext
@pytest.mark.parametrize("order", [2, 4])
def test_backends_agree(order):
    p1, p2, pot, dx = _state()
    np.testing.assert_allclose(cy.laplacian(p1, dx, order), py.laplacian(p1, dx, order),
                               rtol=0, atol=1e-10)
    for a, b in zip(cy.gpe_rhs(p1, p2, pot, 1.0, 0.2, dx, order),
                    py.gpe_rhs(p1, p2, pot, 1.0, 0.2, dx, order)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)
    dt = 0.1 * dx * dx
    for a, b in zip(cy.rk4_steps(p1, p2, pot, 1.0, 0.2, dx, order, dt, 50),
                    py.rk4_steps(p1, p2, pot, 1.0, 0.2, dx, order, dt, 50)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_inputs_not_modified():
    p1, p2, pot, dx = _state()
    c1, c2 = p1.copy(), p2.copy()
    kernels.rk4_steps(p1, p2, pot, 1.0, 0.1, dx, 2, 0.1 * dx * dx, 5)
    assert np.array_equal(p1, c1) and np.array_equal(p2, c2)


def test_pure_python_switch():
    code = "from fluxlab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, FLUXLAB_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.stdout.strip() == "python"
    if cy is not None:
        env.pop("FLUXLAB_PURE_PYTHON")
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert r.stdout.strip() == "cython"
