"""Shared fixtures and independent oracles for the test suite.

The replay helpers re-derive pipeline outputs from tape records alone
(frozen cell selections, float table values, exact division instead of
requantization), so gradient tests compare the product code against an
implementation that shares none of its composition code paths.
"""

from __future__ import annotations

import numpy as np
import pytest

from mulut.core import ImagePlane, LutTable
from mulut.pipelines import PipelineSpec, preset

_S_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))


def random_tables(spec: PipelineSpec, rng: np.random.Generator) -> list[LutTable]:
    """One uniform-random table per lut_slots() entry."""
    blocks = {(si, bi): b for si, bi, b in spec.iter_blocks()}
    tables = []
    for si, bi, _v in spec.lut_slots():
        b = blocks[(si, bi)]
        size = spec.grid.levels**b.n * b.m
        tables.append(
            LutTable(
                n=b.n, m=b.m, grid=spec.grid,
                values=rng.integers(0, 256, size, dtype=np.uint8),
            )
        )
    return tables


def bound_preset(name: str, scale: int, q: int = 4, seed: int = 0, task=None) -> PipelineSpec:
    spec = preset(name, scale, task=task, q=q)
    return spec.bind(random_tables(spec, np.random.default_rng(seed)))


def gray_image(rng: np.random.Generator, h: int, w: int) -> ImagePlane:
    return ImagePlane(rng.integers(0, 256, (1, h, w), dtype=np.uint8))


def rgb_image(rng: np.random.Generator, h: int, w: int) -> ImagePlane:
    return ImagePlane(rng.integers(0, 256, (3, h, w), dtype=np.uint8))


# -- tape replay oracle ----------------------------------------------------------


def _shuffle_float(vals: np.ndarray, h: int, w: int, r: int, c: int) -> np.ndarray:
    return vals.reshape(h, w, c, r, r).transpose(2, 0, 3, 1, 4).reshape(c, h * r, w * r)


def _gather_clamped(plane: np.ndarray, offsets) -> np.ndarray:
    h, w = plane.shape
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    rows = []
    for dy, dx in offsets:
        rows.append(plane[np.minimum(ys + dy, h - 1), np.minimum(xs + dx, w - 1)].ravel())
    return np.stack(rows)


def _segment_nums(seg, shadows: dict, slope_values: dict, delta) -> np.ndarray:
    """Float numerators of one tape segment.

    shadows supplies the table values entering the weighted sums;
    slope_values supplies the vertex differences multiplying the propagated
    input offsets `delta` (None for the first segment or a zero offset).
    """
    nums = np.zeros(seg.out_shape, dtype=np.float64)
    for rec in seg.records:
        vf = np.asarray(shadows[rec.slot], dtype=np.float64).reshape(-1, rec.table.m)
        steps, p = rec.flat.shape
        vals = np.zeros((p, rec.table.m))
        for k in range(steps):
            vals += rec.weights[k][:, None] * vf[rec.flat[k]]
        if delta is not None:
            vb = np.asarray(slope_values[rec.slot], dtype=np.float64).reshape(-1, rec.table.m)
            if rec.kind in ("spatial", "subplane"):
                d_plane = delta[rec.channel] if rec.kind == "spatial" else None
                if rec.kind == "subplane":
                    py, px = _S_OFFSETS[rec.subplane]
                    d_plane = delta[0][py::2, px::2]
                d_rot = np.rot90(d_plane, rec.rotation) if rec.rotation else d_plane
                dx = _gather_clamped(d_rot, rec.pattern.offsets)
            elif rec.kind == "mosaic":
                dx = np.stack([delta[0][dy::2, ox::2].ravel() for dy, ox in _S_OFFSETS])
            else:
                dx = np.stack([delta[rec.perm[k]].ravel() for k in range(3)])
            for k in range(1, steps):
                diff = vb[rec.flat[k]] - vb[rec.flat[k - 1]]
                vals += dx[rec.order[k - 1], np.arange(p), None] * diff
        if rec.kind in ("spatial", "subplane"):
            h, w = rec.frame
            part = _shuffle_float(vals, h, w, rec.upscale, rec.out_channels)
            part = np.rot90(part, -rec.rotation, axes=(1, 2)) if rec.rotation else part
            nums[rec.channel] += rec.gain * part[0]
        elif rec.kind == "mosaic":
            nums += _shuffle_float(vals, *rec.frame, rec.upscale, rec.out_channels)
        elif rec.table.m == 3:
            h, w = rec.frame
            nums += vals.T.reshape(3, h, w)
        else:
            h, w = rec.frame
            nums[rec.channel] += vals[:, 0].reshape(h, w)
    return nums


def replay_output(tape: list, shadows: dict, base: dict | None = None) -> np.ndarray:
    """Float pipeline output for table values `shadows`, selections frozen.

    With `base` given, inter-segment inputs propagate as offsets against the
    base replay through vertex-difference slopes taken at `base`; the result
    is affine in `shadows`, matching the linearization that backward
    transposes. Without `base`, offsets are dropped (single-segment use).
    """
    delta = None
    y_v = None
    for seg in tape:
        y_v = _segment_nums(seg, shadows, base or shadows, delta) / seg.den
        if base is not None:
            # The base run accumulates no offsets: delta is zero there.
            y_0 = _segment_nums(seg, base, base, None) / seg.den
            delta = y_v - y_0
    return y_v


def replay_loss(tape: list, shadows: dict, hq: ImagePlane, base: dict | None = None) -> float:
    d = replay_output(tape, shadows, base) - hq.data.astype(np.float64)
    return float(np.mean(d * d)) / 255.0**2
