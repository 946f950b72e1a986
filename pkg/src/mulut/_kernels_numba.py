"""numba twins of the numpy interpolation kernels.

Same integer arithmetic, explicit per-query loops. Kernels are serial and
fill rows [lo, hi) of a shared output; parallelism happens a level up by
handing disjoint bands to worker threads, which keeps outputs byte-identical
for any worker count.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _interp_loop(values2d, levels, q, x, out, n, lo, hi):
    w_step = np.int64(1) << q

    strides = np.empty(n, dtype=np.int64)
    s = np.int64(1)
    for d in range(n - 1, -1, -1):
        strides[d] = s
        s *= levels

    frac = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    weights = np.empty(n + 1, dtype=np.int64)
    m = values2d.shape[1]

    for i in range(lo, hi):
        base = np.int64(0)
        for d in range(n):
            xv = x[d, i]
            base += (xv >> q) * strides[d]
            frac[d] = xv & (w_step - 1)
            order[d] = d

        # Insertion sort by descending fraction; equal fractions keep
        # ascending dimension order (strict > comparison).
        for a in range(1, n):
            fd = frac[a]
            od = order[a]
            b = a - 1
            while b >= 0 and fd > frac[b]:
                frac[b + 1] = frac[b]
                order[b + 1] = order[b]
                b -= 1
            frac[b + 1] = fd
            order[b + 1] = od

        weights[0] = w_step - frac[0]
        for k in range(1, n):
            weights[k] = frac[k - 1] - frac[k]
        weights[n] = frac[n - 1]

        flat = base
        for c in range(m):
            out[i, c] = weights[0] * np.int64(values2d[flat, c])
        for k in range(n):
            flat += strides[order[k]]
            wk = weights[k + 1]
            if wk != 0:
                for c in range(m):
                    out[i, c] += wk * np.int64(values2d[flat, c])


def interp4_into(values2d, levels, q, x, out, lo, hi) -> None:
    _interp_loop(values2d, levels, q, x, out, 4, lo, hi)


def interp3_into(values2d, levels, q, x, out, lo, hi) -> None:
    _interp_loop(values2d, levels, q, x, out, 3, lo, hi)
