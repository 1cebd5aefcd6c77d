"""Euler stepping backend: compiled kernel if available, NumPy otherwise.

Set ``LATTICE_SPDE_BACKEND=python`` to force the NumPy path.  Both paths use
the same operation order, so they agree to rounding.
"""
from __future__ import annotations

import os

import numpy as np


def euler_steps_py(X, W, nbr, dt, m2, lam, p, inv_delta2, out, record_every, record_offset):
    deg = nbr.shape[1]
    r = 0
    for k in range(W.shape[0]):
        lap = np.zeros_like(X)
        for j in range(deg):
            lap = lap + X[nbr[:, j]]
        lap = (lap - deg * X) * inv_delta2
        xp = X.copy()
        for _ in range(p - 1):
            xp = xp * X
        Y = X + dt * (lap - m2 * X - lam * xp) + W[k]
        if not np.all(np.isfinite(Y)):
            return k
        X[:] = Y
        if k + 1 >= record_offset and (k + 1 - record_offset) % record_every == 0:
            out[r, :] = X
            r += 1
    return -1


BACKEND = "python"
euler_steps = euler_steps_py
if os.environ.get("LATTICE_SPDE_BACKEND", "").lower() != "python":
    try:
        from ._kernels import euler_steps  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass
