"""LUT construction by exhaustive grid traversal, and import validation.

Any function over n pixel values can be cached into a sampled table by
evaluating it at every grid tuple (the 256 endpoint is evaluated at 255,
since pixel inputs never reach it). The trainer lives across a file
boundary, so `validate_import` double-checks that a MULUT1 file agrees
with the block that will load it.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .core import LutTable, SamplingGrid, lut_size_bytes
from .lutio import LutFormatError, StageRole, read_lut
from .pipelines import BlockSpec


def enumerate_grid(n: int, q: int) -> Iterator[tuple[int, ...]]:
    """All (2**(8-q)+1)**n grid tuples in row-major order, values i * 2**q.

    The last level is the nominal 256 endpoint; callers evaluating pixel
    functions clamp it to 255.
    """
    if n < 1:
        raise ValueError(f"dimension n={n} must be >= 1")
    grid = SamplingGrid(q)
    axis = tuple(int(v) for v in grid.level_values())
    return itertools.product(axis, repeat=n)


def cache_function(
    fn: Callable[[tuple[int, ...]], Sequence[float]], n: int, m: int, q: int
) -> LutTable:
    """Cache fn at every grid tuple: entry = round-half-up(clamp(fn, 0, 255)).

    fn receives clamped tuples (256 evaluated as 255) and returns m values.
    """
    grid = SamplingGrid(q)
    out = np.empty(lut_size_bytes(q, n, m), dtype=np.uint8)
    pos = 0
    for tup in enumerate_grid(n, q):
        clamped = tuple(min(v, 255) for v in tup)
        vals = fn(clamped)
        if len(vals) != m:
            raise ValueError(f"fn returned {len(vals)} values, expected {m}")
        for v in vals:
            v = min(max(float(v), 0.0), 255.0)
            out[pos] = int(np.floor(v + 0.5))
            pos += 1
    return LutTable(n=n, m=m, grid=grid, values=out)


def cache_function_vectorized(
    fn: Callable[[np.ndarray], np.ndarray], n: int, m: int, q: int
) -> LutTable:
    """Vectorized twin of cache_function: fn maps (n, E) int64 to (E, m) floats.

    Produces the identical table (same clamping and rounding); exists so CLI
    conversions of full 4D grids stay fast.
    """
    grid = SamplingGrid(q)
    axis = grid.level_values()
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij")).reshape(n, -1)
    clamped = np.minimum(mesh, 255)
    vals = np.asarray(fn(clamped), dtype=np.float64)
    if vals.shape != (mesh.shape[1], m):
        raise ValueError(f"fn returned shape {vals.shape}, expected {(mesh.shape[1], m)}")
    vals = np.clip(vals, 0.0, 255.0)
    out = np.floor(vals + 0.5).astype(np.uint8)
    return LutTable(n=n, m=m, grid=grid, values=out.reshape(-1))


# -- builtin cacheable functions (CLI `convert --function`) -------------------


def _bilinear_weights(r: int) -> np.ndarray:
    """(r*r, 4) weights expressing sub-pixel bilinear upsampling over an S cell."""
    w = np.empty((r * r, 4), dtype=np.float64)
    for a in range(r):
        for b in range(r):
            fy, fx = a / r, b / r
            w[a * r + b] = (
                (1 - fy) * (1 - fx),
                (1 - fy) * fx,
                fy * (1 - fx),
                fy * fx,
            )
    return w


def builtin_function(name: str, upscale: int = 1):
    """A named (fn, n, m) triple for cache_function_vectorized.

    Spatial builtins (n=4, S-cell semantics):
        copy-anchor   m=1, output = anchor pixel
        mean          m=1, mean of the 4 gathered pixels
        nearest       m=r*r copies of the anchor (nearest-neighbor upscale)
        bilinear      m=r*r bilinear sub-pixel upsample over the 2x2 cell

    Channel builtins (n=3):
        identity-channel   m=3, (r, g, b) passthrough
        channel-swap       m=3, (g, b, r)
        channel-tone       m=1, first channel passthrough (identity tone map)
    """
    r2 = upscale * upscale
    if name == "copy-anchor":
        return (lambda x: x[0][:, None].astype(np.float64)), 4, 1
    if name == "mean":
        return (lambda x: x.mean(axis=0)[:, None]), 4, 1
    if name == "nearest":
        return (lambda x: np.repeat(x[0][:, None], r2, axis=1).astype(np.float64)), 4, r2
    if name == "bilinear":
        weights = _bilinear_weights(upscale)
        return (lambda x: x.T.astype(np.float64) @ weights.T), 4, r2
    if name == "identity-channel":
        return (lambda x: x.T.astype(np.float64)), 3, 3
    if name == "channel-swap":
        return (lambda x: x[[1, 2, 0]].T.astype(np.float64)), 3, 3
    if name == "channel-tone":
        return (lambda x: x[0][:, None].astype(np.float64)), 3, 1
    raise ValueError(f"unknown builtin function {name!r}")


BUILTIN_FUNCTIONS = (
    "copy-anchor", "mean", "nearest", "bilinear",
    "identity-channel", "channel-swap", "channel-tone",
)


# -- trainer-boundary validation ----------------------------------------------


def validate_import(
    data: bytes,
    expected: BlockSpec | None = None,
    grid: SamplingGrid | None = None,
    allow_constant: bool = False,
) -> list[str]:
    """Check a MULUT1 stream, returning diagnostics (empty list means ok).

    With `expected`, every header field is compared against the block that
    would load the file; each mismatch is reported with its field name.
    Payload statistics flag constant tables unless declared intentional.
    """
    diagnostics: list[str] = []
    try:
        rec = read_lut(data)
    except LutFormatError as exc:
        return [f"{exc.code}: {exc}"]

    if expected is not None:
        want_n = 3 if expected.kind == "channel" else 4
        if rec.table.n != want_n:
            diagnostics.append(f"n: file has {rec.table.n}, expected {want_n}")
        if rec.table.m != expected.m:
            diagnostics.append(f"m: file has {rec.table.m}, expected {expected.m}")
        if rec.upscale != (expected.upscale if expected.kind != "channel" else 1):
            diagnostics.append(
                f"upscale: file has {rec.upscale}, expected {expected.upscale}"
            )
        if rec.role != expected.role:
            diagnostics.append(
                f"role: file has {rec.role.name}, expected {expected.role.name}"
            )
        if expected.kind == "channel":
            if rec.pattern is not None:
                diagnostics.append("pattern: file has one, channel blocks have none")
        elif rec.pattern is None:
            diagnostics.append("pattern: file has none, spatial blocks need one")
        elif expected.pattern is not None:
            if rec.pattern.id != expected.pattern.id:
                diagnostics.append(
                    f"pattern: file has {rec.pattern.id!r}, expected {expected.pattern.id!r}"
                )
            elif rec.pattern.offsets != expected.pattern.offsets:
                diagnostics.append(
                    f"pattern: offsets {rec.pattern.offsets} != expected {expected.pattern.offsets}"
                )
    if grid is not None and rec.table.grid != grid:
        diagnostics.append(f"q: file has {rec.table.grid.q}, expected {grid.q}")

    if not allow_constant and rec.table.values.size > 1:
        first = rec.table.values[0]
        if bool((rec.table.values == first).all()):
            diagnostics.append(
                f"payload: constant table (every byte = {int(first)}); "
                "pass allow_constant if intentional"
            )
    return diagnostics
