"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same signatures; ``kernels``
picks the compiled one when it imports.
"""
import numpy as np

SQRT3_12 = np.sqrt(3.0) / 12.0


def _expm_traceless(a, b, c):
    """``exp([[a, b], [c, -a]])`` as the tuple of its four entries."""
    d = a * a + b * c
    r = np.sqrt(np.abs(d))
    pos = d > 0
    small = r < 1e-8
    rs = np.where(small, 1.0, r)
    ch = np.where(pos, np.cosh(r), np.cos(r))
    sh = np.where(pos, np.sinh(rs) / rs, np.sin(rs) / rs)
    # series for tiny arguments
    ch = np.where(small, 1.0 + 0.5 * d, ch)
    sh = np.where(small, 1.0 + d / 6.0, sh)
    return ch + sh * a, sh * b, sh * c, ch - sh * a


def magnus_sweep(v1, v2, steps, lam, y0, store=True, renorm=False):
    """Propagate ``y = (f, f')`` through ``f'' = (V - lam) f`` with 4th-order Magnus steps.

    Parameters
    ----------
    v1, v2 : (n,) float arrays
        Potential at the two Gauss points of each step.
    steps : (n,) float array
        Signed step lengths.
    lam : (m,) float array
        Spectral parameters.
    y0 : (m, 2) float array
        Initial values ``(f, f')`` for each ``lam``.
    store : bool
        Keep every intermediate value.
    renorm : bool
        Rescale each solution whenever it exceeds ``1e100`` (only the
        direction of the final vector is then meaningful).

    Returns
    -------
    (m, n + 1, 2) array when ``store`` else (m, 2) array of final values.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    steps = np.asarray(steps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    f = np.array(y0[:, 0], dtype=float)
    g = np.array(y0[:, 1], dtype=float)
    n = steps.shape[0]
    if store:
        out = np.empty((lam.shape[0], n + 1, 2))
        out[:, 0, 0] = f
        out[:, 0, 1] = g
    for j in range(n):
        s = steps[j]
        q1 = v1[j] - lam
        q2 = v2[j] - lam
        a = SQRT3_12 * s * s * (q1 - q2)
        c = 0.5 * s * (q1 + q2)
        e11, e12, e21, e22 = _expm_traceless(a, s, c)
        f, g = e11 * f + e12 * g, e21 * f + e22 * g
        if renorm:
            big = np.abs(f) + np.abs(g) > 1e100
            if np.any(big):
                scale = np.where(big, 1e-100, 1.0)
                f = f * scale
                g = g * scale
        if store:
            out[:, j + 1, 0] = f
            out[:, j + 1, 1] = g
    if store:
        return out
    return np.stack([f, g], axis=-1)


def power_nonlinearity(u, p):
    """``sign(u) |u|^p`` evaluated as ``exp(p log|u|)``, zero at ``u = 0``."""
    a = np.abs(u)
    out = np.zeros_like(a)
    nz = a > 0
    out[nz] = np.exp(p * np.log(a[nz]))
    return np.copysign(out, u)
