"""Select the compiled kernels when available, else the numpy fallback.

Set ``OSCDFS_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("OSCDFS_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def volterra_trapezoid(kernel, h):
    return kernels.volterra_trapezoid(kernel, h)


def rk4_linear(step, rho0, nsteps, store_every, d):
    return kernels.rk4_linear(step, rho0, nsteps, store_every, d)
