"""Simplex interpolation between sampled LUT entries.

A query x = (x_1..x_n) of uint8 values splits into a cell index c_d = x_d >> q
and a fraction f_d = x_d & (2**q - 1). Sorting the fractions in descending
order (ties broken toward the lower dimension index) picks one of the n!
simplexes of the hypercube; the result is a weighted sum of the n+1 simplex
vertices

    P_0 = c,  P_k = P_{k-1} + e_{d(k)}   (d(k) = dimension with k-th largest f)

with integer weights

    w_0 = W - f_(1),  w_k = f_(k) - f_(k+1),  w_n = f_(n),   W = 2**q.

The weights sum to W, so the exact value is (sum_k w_k * LUT[P_k]) / W.
Functions here return the integer numerators and the denominator separately;
division is deferred until a whole pipeline stage is accumulated.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .core import LutTable


def _query(table: LutTable, x: Sequence[int], n: int) -> tuple[np.ndarray, int]:
    if table.n != n:
        raise ValueError(f"table is {table.n}D, expected {n}D")
    xs = tuple(int(v) for v in x)
    if len(xs) != n:
        raise ValueError(f"query has {len(xs)} coordinates, expected {n}")
    for v in xs:
        if not 0 <= v <= 255:
            raise ValueError(f"query value {v} outside uint8 range")
    arr = np.array(xs, dtype=np.int64).reshape(n, 1)
    values2d = table.values.reshape(-1, table.m)
    out = kernels.interp_batch(values2d, table.grid.levels, table.grid.q, arr)
    return out[0], table.grid.interval


def simplex_interp_4d(table: LutTable, x: Sequence[int]) -> tuple[np.ndarray, int]:
    """Interpolate a 4D table at x; returns ((m,) numerators, denominator 2**q)."""
    return _query(table, x, 4)


def tetrahedral_interp_3d(table: LutTable, x: Sequence[int]) -> tuple[np.ndarray, int]:
    """Interpolate a 3D table at x; returns ((m,) numerators, denominator 2**q)."""
    return _query(table, x, 3)
