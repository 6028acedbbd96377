# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; signatures mirror ``_pykernels``.

Inner products and matrix-vector products go through BLAS (via scipy's
Cython bindings); the loops around them run without the interpreter.
"""
import numpy as np
from scipy.linalg.cython_blas cimport zdotu, zgemv


def volterra_trapezoid(kernel, double h):
    cdef double complex[::1] K = np.ascontiguousarray(kernel, dtype=np.complex128)
    cdef int n = K.shape[0]
    u_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] u = u_arr
    cdef double complex k0 = K[0]
    cdef double complex denom = 1.0 + 0.25 * h * h * k0
    cdef double complex mem = 0.0
    cdef double complex s
    cdef int m, inc = 1, rev = -1
    u[0] = 1.0
    for m in range(n - 1):
        s = 0.5 * K[m + 1] * u[0]
        if m > 0:
            # sum_{j=1..m} K[m+1-j] u[j]: K[1..m] read backwards
            s = s + zdotu(&m, &K[1], &rev, &u[1], &inc)
        s = s * h
        u[m + 1] = (u[m] - 0.5 * h * (mem + s)) / denom
        mem = s + 0.5 * h * k0 * u[m + 1]
    return u_arr


def rk4_linear(step, rho0, Py_ssize_t nsteps, Py_ssize_t store_every, Py_ssize_t d):
    cdef double complex[:, ::1] S = np.ascontiguousarray(step, dtype=np.complex128)
    cdef int D = d * d
    cdef double complex[::1] x = np.array(rho0, dtype=np.complex128)
    cdef double complex[::1] y = np.empty(D, dtype=np.complex128)
    cdef Py_ssize_t nstore = nsteps // store_every + 1
    if nsteps % store_every:
        nstore += 1
    out_arr = np.empty((nstore, D), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t n, i, j, k = 1
    cdef double complex a, b
    cdef double complex one = 1.0, zero = 0.0
    cdef int inc = 1
    cdef char trans = b"T"  # row-major S is column-major S^T
    out[0, :] = x
    for n in range(1, nsteps + 1):
        zgemv(&trans, &D, &D, &one, &S[0, 0], &D, &x[0], &inc, &zero, &y[0], &inc)
        for i in range(d):
            x[i * d + i] = y[i * d + i].real
            for j in range(i + 1, d):
                a = y[i * d + j]
                b = y[j * d + i]
                x[i * d + j] = 0.5 * (a + b.conjugate())
                x[j * d + i] = 0.5 * (b + a.conjugate())
        if n % store_every == 0 or n == nsteps:
            out[k, :] = x
            k += 1
    return out_arr
