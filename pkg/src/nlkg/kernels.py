"""Backend selection for the hot loops.

The compiled extension ``nlkg._kernels`` is used when it imports; otherwise
(or when ``NLKG_PURE_PYTHON=1``) the numpy implementation is used.  Both
produce the same numbers up to round-off.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("NLKG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"


def magnus_sweep(v1, v2, steps, lam, y0, store=True, renorm=False):
    return _impl.magnus_sweep(v1, v2, steps, lam, y0, store, renorm)


def power_nonlinearity(u, p):
    u = np.asarray(u, dtype=float)
    return _impl.power_nonlinearity(u.ravel(), float(p)).reshape(u.shape)
