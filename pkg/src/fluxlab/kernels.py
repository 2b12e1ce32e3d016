"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the NumPy
implementation. Set ``FLUXLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("FLUXLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

laplacian = _impl.laplacian
gpe_rhs = _impl.gpe_rhs
rk4_steps = _impl.rk4_steps


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
