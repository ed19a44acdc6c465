"""Compiled inner loops for permutation replicates.

Every replicate is computed by one thread with a fixed summation order, so
results do not depend on the number of threads.
"""

import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # TBB is often present but too old; skip straight to a working layer.
    numba.config.THREADING_LAYER = "workqueue"


def configure_threads() -> int:
    """Apply ``DYADPERM_THREADS`` (capped at numba's pool size); return the count in use."""
    value = os.environ.get("DYADPERM_THREADS", "").strip()
    if value:
        requested = int(value)
        if requested < 1:
            raise ValueError("DYADPERM_THREADS must be a positive integer")
        numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


@njit(parallel=True, cache=True)
def permuted_cross_rowsums(z, moving, fixed, perms):
    """Row cross-products between permuted and fixed layers of ``z``.

    ``out[r, i, s, t] = sum_j z[moving[s], p[i], p[j]] * z[fixed[t], i, j]``
    with ``p = perms[r]``.
    """
    reps, n = perms.shape
    km = moving.shape[0]
    kf = fixed.shape[0]
    out = np.zeros((reps, n, km, kf))
    for r in prange(reps):
        p = perms[r]
        for s in range(km):
            zm = z[moving[s]]
            for t in range(kf):
                zf = z[fixed[t]]
                for i in range(n):
                    a = zm[p[i]]
                    b = zf[i]
                    acc = 0.0
                    for j in range(n):
                        acc += a[p[j]] * b[j]
                    out[r, i, s, t] = acc
    return out


@njit(cache=True, inline="always")
def _bounded(x, m):
    hi = x >> np.uint64(32)
    lo = x & np.uint64(0xFFFFFFFF)
    mm = np.uint64(m)
    return (hi * mm + ((lo * mm) >> np.uint64(32))) >> np.uint64(32)


@njit(parallel=True, cache=True)
def shuffle_rows(words, n):
    """Fisher-Yates shuffle of ``range(n)`` per row of 64-bit ``words``."""
    reps = words.shape[0]
    out = np.empty((reps, n), dtype=np.int64)
    for r in prange(reps):
        for i in range(n):
            out[r, i] = i
        k = 0
        for i in range(n - 1, 0, -1):
            j = _bounded(words[r, k], i + 1)
            k += 1
            tmp = out[r, i]
            out[r, i] = out[r, j]
            out[r, j] = tmp
    return out
