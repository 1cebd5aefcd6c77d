# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled explicit Euler stepping (see ``_stepping.euler_steps`` for the reference)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def euler_steps(double[::1] X, const double[:, ::1] W, const long[:, ::1] nbr, double dt, double m2,
                double lam, int p, double inv_delta2, double[:, ::1] out, long record_every, long record_offset):
    """Advance ``X`` in place by ``W.shape[0]`` steps; returns the index of the first
    non-finite step or -1.  After step ``k`` (1-based) the field is copied into
    ``out[r]`` whenever ``k >= record_offset`` and ``(k - record_offset) % record_every == 0``.
    """
    cdef Py_ssize_t n_steps = W.shape[0], n = X.shape[0], deg = nbr.shape[1]
    cdef Py_ssize_t k, i, j
    cdef long r = 0
    cdef double lap, xp, x
    cdef double[::1] Y = np.empty(n)
    for k in range(n_steps):
        for i in range(n):
            x = X[i]
            lap = 0.0
            for j in range(deg):
                lap = lap + X[nbr[i, j]]
            lap = (lap - deg * x) * inv_delta2
            xp = x
            for j in range(p - 1):
                xp = xp * x
            Y[i] = x + dt * (lap - m2 * x - lam * xp) + W[k, i]
        for i in range(n):
            if not isfinite(Y[i]):
                return k
            X[i] = Y[i]
        if k + 1 >= record_offset and (k + 1 - record_offset) % record_every == 0:
            out[r, :] = X
            r += 1
    return -1
