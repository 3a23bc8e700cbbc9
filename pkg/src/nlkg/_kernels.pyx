# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Magnus sweeps for ``f'' = (V - lam) f`` and the power nonlinearity."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, cosh, sinh, cos, sin, exp, log, copysign

cnp.import_array()

cdef double SQRT3_12 = 0.14433756729740643  # sqrt(3) / 12


cdef inline void _step(double s, double q1, double q2, double *f, double *g) nogil:
    cdef double a = SQRT3_12 * s * s * (q1 - q2)
    cdef double c = 0.5 * s * (q1 + q2)
    cdef double d = a * a + s * c
    cdef double r = sqrt(fabs(d))
    cdef double ch, sh, f0, g0
    if r < 1e-8:
        ch = 1.0 + 0.5 * d
        sh = 1.0 + d / 6.0
    elif d > 0:
        ch = cosh(r)
        sh = sinh(r) / r
    else:
        ch = cos(r)
        sh = sin(r) / r
    f0 = f[0]
    g0 = g[0]
    f[0] = (ch + sh * a) * f0 + sh * s * g0
    g[0] = sh * c * f0 + (ch - sh * a) * g0


def magnus_sweep(v1, v2, steps, lam, y0, bint store=True, bint renorm=False):
    cdef double[::1] V1 = np.ascontiguousarray(v1, dtype=np.float64)
    cdef double[::1] V2 = np.ascontiguousarray(v2, dtype=np.float64)
    cdef double[::1] S = np.ascontiguousarray(steps, dtype=np.float64)
    cdef double[::1] LAM = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[:, ::1] Y0 = np.ascontiguousarray(y0, dtype=np.float64)
    cdef Py_ssize_t n = S.shape[0]
    cdef Py_ssize_t m = LAM.shape[0]
    cdef Py_ssize_t i, j
    cdef double f, g, lm
    cdef double[:, :, ::1] out3
    cdef double[:, ::1] out2
    if store:
        res = np.empty((m, n + 1, 2))
        out3 = res
    else:
        res = np.empty((m, 2))
        out2 = res
    with nogil:
        for i in range(m):
            f = Y0[i, 0]
            g = Y0[i, 1]
            lm = LAM[i]
            if store:
                out3[i, 0, 0] = f
                out3[i, 0, 1] = g
            for j in range(n):
                _step(S[j], V1[j] - lm, V2[j] - lm, &f, &g)
                if renorm and fabs(f) + fabs(g) > 1e100:
                    f = f * 1e-100
                    g = g * 1e-100
                if store:
                    out3[i, j + 1, 0] = f
                    out3[i, j + 1, 1] = g
            if not store:
                out2[i, 0] = f
                out2[i, 1] = g
    return res


def power_nonlinearity(u, double p):
    cdef double[::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = U.shape[0]
    res = np.empty(n)
    cdef double[::1] out = res
    cdef Py_ssize_t i
    cdef double a
    with nogil:
        for i in range(n):
            a = fabs(U[i])
            if a > 0:
                out[i] = copysign(exp(p * log(a)), U[i])
            else:
                out[i] = 0.0
    return res
