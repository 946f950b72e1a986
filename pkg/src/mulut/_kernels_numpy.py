"""Vectorized numpy kernels for batched LUT interpolation.

All arithmetic is integer (int64 accumulators), so results are exact and
identical to the numba twins bit for bit. Kernels take query coordinates as
an (n, P) int64 array and the LUT payload reshaped to (entries, m), and
write (P, m) int64 numerators over denominator 2**q. The `lo, hi` bounds
let callers fill disjoint bands of the same output from worker threads.
"""

from __future__ import annotations

import numpy as np


def _simplex_parts(x: np.ndarray, levels: int, q: int):
    """Vertex flat indices, weights, and step-dimension order for each query.

    Fractions are sorted descending; ties keep ascending dimension order
    (stable argsort on the negated fractions).
    """
    n, p = x.shape
    w_step = np.int64(1) << q
    cell = x >> q
    frac = x & (w_step - 1)

    order = np.argsort(-frac, axis=0, kind="stable")
    sorted_frac = np.take_along_axis(frac, order, axis=0)

    weights = np.empty((n + 1, p), dtype=np.int64)
    weights[0] = w_step - sorted_frac[0]
    weights[1:n] = sorted_frac[: n - 1] - sorted_frac[1:]
    weights[n] = sorted_frac[n - 1]

    strides = levels ** np.arange(n - 1, -1, -1, dtype=np.int64)
    flat = np.empty((n + 1, p), dtype=np.int64)
    flat[0] = (cell * strides[:, None]).sum(axis=0)
    step_strides = strides[order]
    for k in range(n):
        flat[k + 1] = flat[k] + step_strides[k]
    return flat, weights, order


def _accumulate(values2d: np.ndarray, flat: np.ndarray, weights: np.ndarray) -> np.ndarray:
    steps = flat.shape[0]
    out = np.zeros((flat.shape[1], values2d.shape[1]), dtype=np.int64)
    for k in range(steps):
        out += weights[k][:, None] * values2d[flat[k]].astype(np.int64)
    return out


def interp4_into(
    values2d: np.ndarray, levels: int, q: int, x: np.ndarray,
    out: np.ndarray, lo: int, hi: int,
) -> None:
    """4D simplex interpolation of queries [lo, hi) into out rows [lo, hi)."""
    flat, weights, _ = _simplex_parts(x[:, lo:hi], levels, q)
    out[lo:hi] = _accumulate(values2d, flat, weights)


def interp3_into(
    values2d: np.ndarray, levels: int, q: int, x: np.ndarray,
    out: np.ndarray, lo: int, hi: int,
) -> None:
    """3D (tetrahedral) interpolation of queries [lo, hi) into out rows [lo, hi)."""
    flat, weights, _ = _simplex_parts(x[:, lo:hi], levels, q)
    out[lo:hi] = _accumulate(values2d, flat, weights)


def interp_batch_tape(values2d: np.ndarray, levels: int, q: int, x: np.ndarray):
    """Interpolation that also reports the touched vertices.

    Returns (out (P, m), vertex flat indices (n+1, P), weights (n+1, P),
    step dimension order (n, P)) — the record a finetuning pass needs to
    route gradients back onto table entries and input pixels.
    """
    flat, weights, order = _simplex_parts(x, levels, q)
    return _accumulate(values2d, flat, weights), flat, weights, order
