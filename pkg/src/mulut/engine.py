"""Execution of staged LUT pipelines.

All block outputs are kept as exact integer numerators over a shared
denominator; the rotation ensemble's 1/4 and the branch fusion's 1/N are
folded into that denominator, and a single round-half-up division happens
at each stage boundary (re-indexing) and at the final output. This makes
every pipeline a pure integer function of its inputs: bit-exact across
runs, thread counts, and kernel backends.

The forward pass can optionally record a tape (vertex indices and weights
of every interpolation query) for the finetuning module; the tape path is
single-threaded and uses the same arithmetic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .core import PATTERNS, ImagePlane, LutTable, Pattern
from .pipelines import BlockSpec, PipelineSpec, demosaic_frontend


class EngineError(ValueError):
    """Pipeline and image are incompatible, or a spec is unusable."""


@dataclass
class RationalPlane:
    """Intermediate raster: integer numerators (c, h, w) over one denominator."""

    nums: np.ndarray
    den: int


@dataclass
class StageResult:
    """One fused or to-be-fused branch: numerators, denominator, term count."""

    nums: np.ndarray
    den: int
    terms: int = 1


# -- tape ---------------------------------------------------------------------


@dataclass
class QueryRecord:
    """One batched interpolation call, with everything backward needs."""

    slot: tuple[int, int, int]
    kind: str
    channel: int
    rotation: int
    frame: tuple[int, int]
    upscale: int
    out_channels: int
    pattern: Pattern | None
    table: LutTable
    flat: np.ndarray
    weights: np.ndarray
    order: np.ndarray
    perm: tuple[int, ...] | None = None
    subplane: int = -1
    gain: int = 1


@dataclass
class TapeSegment:
    """One requantization boundary: queries fused over a common denominator."""

    kind: str
    stage: int
    den: int
    in_shape: tuple[int, int, int]
    out_shape: tuple[int, int, int]
    records: list[QueryRecord] = field(default_factory=list)


Tape = list


# -- primitives ---------------------------------------------------------------


def _as_plane(img) -> np.ndarray:
    if isinstance(img, ImagePlane):
        if img.channels != 1:
            raise EngineError("spatial blocks take single-channel input")
        return img.plane(0)
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise EngineError(f"expected a 2D uint8 plane, got {arr.dtype} ndim={arr.ndim}")
    return arr


def _query(values2d: np.ndarray, levels: int, q: int, x: np.ndarray, pool) -> np.ndarray:
    """Batched interpolation, optionally split into bands across a pool."""
    p = x.shape[1]
    out = np.empty((p, values2d.shape[1]), dtype=np.int64)
    if pool is None or p < 4096:
        kernels.interp_into(values2d, levels, q, x, out, 0, p)
        return out
    executor, bands = pool
    bands = max(1, min(bands, p))
    edges = [p * i // bands for i in range(bands + 1)]
    futures = [
        executor.submit(kernels.interp_into, values2d, levels, q, x, out, lo, hi)
        for lo, hi in zip(edges, edges[1:])
        if lo < hi
    ]
    for f in futures:
        f.result()
    return out


def _gather(plane: np.ndarray, pattern: Pattern) -> np.ndarray:
    """Pattern pixels for every anchor, replicate-padded, as (4, h*w) int64."""
    h, w = plane.shape
    eh, ew = pattern.extent
    padded = np.pad(plane, ((0, eh - 1), (0, ew - 1)), mode="edge")
    x = np.empty((4, h * w), dtype=np.int64)
    for k, (dy, dx) in enumerate(pattern.offsets):
        x[k] = padded[dy : dy + h, dx : dx + w].ravel()
    return x


def _pixel_shuffle(vals: np.ndarray, h: int, w: int, r: int, c_out: int) -> np.ndarray:
    """(h*w, r*r*c_out) values to a (c_out, h*r, w*r) raster.

    Value index k maps to output channel k // r**2 and sub-pixel offset
    ((k % r**2) // r, k % r) below/right of the anchor's upscaled site.
    """
    a = vals.reshape(h, w, c_out, r, r)
    a = a.transpose(2, 0, 3, 1, 4)
    return np.ascontiguousarray(a.reshape(c_out, h * r, w * r))


def _requant_array(nums: np.ndarray, den: int) -> np.ndarray:
    """Round-half-up of nums/den, clamped to uint8."""
    out = (2 * nums + den) // (2 * den)
    return np.clip(out, 0, 255).astype(np.uint8)


def requantize(plane: RationalPlane) -> ImagePlane:
    """Round-half-up then clamp to [0, 255]; the inter-stage re-indexing step."""
    return ImagePlane(_requant_array(plane.nums, plane.den))


class _TapeCtx:
    """Mutable capture target threaded through one pipeline run."""

    def __init__(self, tape: list):
        self.tape = tape
        self.segment: TapeSegment | None = None

    def open(self, kind: str, stage: int, den: int, in_shape, out_shape) -> None:
        self.segment = TapeSegment(kind, stage, den, tuple(in_shape), tuple(out_shape))
        self.tape.append(self.segment)

    def record(self, **kw) -> None:
        flat, weights, order = kw.pop("fwo")
        self.segment.records.append(
            QueryRecord(
                flat=flat.astype(np.int32),
                weights=weights.astype(np.int32),
                order=order.astype(np.int8),
                **kw,
            )
        )


def _interp_block(
    table: LutTable, x: np.ndarray, pool, tape: _TapeCtx | None
) -> tuple[np.ndarray, tuple | None]:
    values2d = table.values.reshape(-1, table.m)
    g = table.grid
    if tape is None:
        return _query(values2d, g.levels, g.q, x, pool), None
    out, flat, weights, order = kernels.interp_batch_tape(values2d, g.levels, g.q, x)
    return out, (flat, weights, order)


def _apply_spatial(
    plane: np.ndarray,
    pattern: Pattern,
    table: LutTable,
    upscale: int,
    c_out: int,
    pool=None,
    tape: _TapeCtx | None = None,
    tape_kw: dict | None = None,
) -> np.ndarray:
    h, w = plane.shape
    x = _gather(plane, pattern)
    vals, fwo = _interp_block(table, x, pool, tape)
    if tape is not None:
        tape.record(
            fwo=fwo, frame=(h, w), pattern=pattern, table=table,
            upscale=upscale, out_channels=c_out, **tape_kw,
        )
    return _pixel_shuffle(vals, h, w, upscale, c_out)


def apply_block(img, block: BlockSpec, variant: int = 0) -> RationalPlane:
    """One spatial LUT over a single-channel image; numerators over W = 2**q.

    Covers the plain spatial kinds (spatial, subplane geometry). Mosaic
    blocks read the whole Bayer raster; use run_pipeline for those.
    """
    if block.kind == "channel":
        raise EngineError("channel blocks go through apply_channel_block")
    if block.kind == "mosaic":
        plane = _as_plane(img)
        nums = _apply_mosaic(plane, block.lut_for(0), pool=None)
        return RationalPlane(nums, block.lut_for(0).grid.interval)
    plane = _as_plane(img)
    table = block.lut_for(variant)
    nums = _apply_spatial(plane, block.pattern, table, block.upscale, block.out_channels)
    return RationalPlane(nums, table.grid.interval)


def rotation_ensemble(apply: Callable[[np.ndarray, int], RationalPlane], img) -> RationalPlane:
    """Average a block application over the 4 input rotations.

    `apply(plane, j)` runs the block on the j-quarter-turn-rotated plane;
    its output raster is rotated back before accumulation, and the result
    keeps denominator 4 * (single-application denominator).
    """
    plane = _as_plane(img)
    acc: np.ndarray | None = None
    den = 0
    for j in range(4):
        rotated = np.rot90(plane, j) if j else plane
        part = apply(rotated, j)
        back = np.rot90(part.nums, -j, axes=(1, 2)) if j else part.nums
        if acc is None:
            acc = np.ascontiguousarray(back)
            den = part.den
        else:
            if part.den != den:
                raise EngineError("rotations returned mismatched denominators")
            acc += back
    return RationalPlane(acc, 4 * den)


def fuse_parallel(branches: Sequence[RationalPlane | StageResult]) -> RationalPlane:
    """V = (sum of branches) / N, kept rational."""
    if not branches:
        raise EngineError("fuse_parallel needs at least one branch")
    first = branches[0]
    acc = first.nums.copy()
    for b in branches[1:]:
        if b.nums.shape != first.nums.shape:
            raise EngineError(
                f"branch geometry mismatch: {b.nums.shape} vs {first.nums.shape}"
            )
        if b.den != first.den:
            raise EngineError(f"branch denominator mismatch: {b.den} vs {first.den}")
        acc += b.nums
    return RationalPlane(acc, first.den * len(branches))


def _apply_channel(
    arr3: np.ndarray,
    table: LutTable,
    pool=None,
    tape: _TapeCtx | None = None,
    slot: tuple[int, int, int] = (0, -1, 0),
) -> np.ndarray:
    _, h, w = arr3.shape
    p = h * w
    if table.m == 3:
        x = np.empty((3, p), dtype=np.int64)
        for k in range(3):
            x[k] = arr3[k].ravel()
        vals, fwo = _interp_block(table, x, pool, tape)
        if tape is not None:
            tape.record(
                fwo=fwo, slot=slot, kind="channel", channel=-1, rotation=0,
                frame=(h, w), upscale=1, out_channels=3, pattern=None,
                table=table, perm=(0, 1, 2),
            )
        return np.ascontiguousarray(vals.T.reshape(3, h, w))
    # m == 1: the same scalar map serves all three outputs, each seeing the
    # channels in cyclic order starting from its own.
    nums = np.empty((3, h, w), dtype=np.int64)
    for c in range(3):
        perm = (c, (c + 1) % 3, (c + 2) % 3)
        x = np.empty((3, p), dtype=np.int64)
        for k in range(3):
            x[k] = arr3[perm[k]].ravel()
        vals, fwo = _interp_block(table, x, pool, tape)
        if tape is not None:
            tape.record(
                fwo=fwo, slot=slot, kind="channel", channel=c, rotation=0,
                frame=(h, w), upscale=1, out_channels=1, pattern=None,
                table=table, perm=perm,
            )
        nums[c] = vals[:, 0].reshape(h, w)
    return nums


def apply_channel_block(img, block: BlockSpec) -> RationalPlane:
    """Pointwise 3D-LUT over (R, G, B); numerators over W = 2**q."""
    if block.kind != "channel":
        raise EngineError("apply_channel_block takes a channel block")
    if isinstance(img, ImagePlane):
        if img.channels != 3:
            raise EngineError("channel blocks take 3-channel input")
        arr3 = img.data
    else:
        arr3 = np.asarray(img)
        if arr3.ndim != 3 or arr3.shape[0] != 3 or arr3.dtype != np.uint8:
            raise EngineError("expected (3, h, w) uint8 input")
    table = block.lut_for(0)
    return RationalPlane(_apply_channel(arr3, table), table.grid.interval)


def _apply_mosaic(
    plane: np.ndarray,
    table: LutTable,
    pool=None,
    tape: _TapeCtx | None = None,
    slot: tuple[int, int, int] = (0, 0, 0),
) -> np.ndarray:
    """Stride-2 Bayer-cell block: (h, w) mosaic to (3, h, w) numerators."""
    h, w = plane.shape
    ah, aw = h // 2, w // 2
    arranged = demosaic_frontend(ImagePlane(plane))
    x = np.empty((4, ah * aw), dtype=np.int64)
    for k in range(4):
        x[k] = arranged[k].ravel()
    vals, fwo = _interp_block(table, x, pool, tape)
    if tape is not None:
        tape.record(
            fwo=fwo, slot=slot, kind="mosaic", channel=0, rotation=0,
            frame=(ah, aw), upscale=2, out_channels=3,
            pattern=None, table=table,
        )
    return _pixel_shuffle(vals, ah, aw, 2, 3)


_SUBPLANE_GAINS = (2, 1, 1, 2)  # R and B appear once, the greens pair up


def _run_subplane_stage(
    plane: np.ndarray,
    block: BlockSpec,
    pool,
    tape: _TapeCtx | None,
    stage: int,
) -> RationalPlane:
    """Baseline-A frontend: upscale the four Bayer subplanes independently.

    R and B feed their output channels directly; the two green subplanes are
    averaged. Everything stays rational: with per-plane ensemble denominator
    4W, the combined raster uses 8W and gains (2, 1, 1, 2).
    """
    table = block.lut_for(0)
    w_interp = table.grid.interval
    offsets = ((0, 0), (0, 1), (1, 0), (1, 1))
    h, w = plane.shape
    out = np.zeros((3, h, w), dtype=np.int64)
    target = {0: 0, 1: 1, 2: 1, 3: 2}
    for sp, (py, px) in enumerate(offsets):
        sub = np.ascontiguousarray(plane[py::2, px::2])

        def one(p2d: np.ndarray, j: int, sp=sp) -> RationalPlane:
            kw = dict(slot=(stage, 0, 0), kind="subplane", channel=target[sp],
                      rotation=j, subplane=sp, gain=_SUBPLANE_GAINS[sp])
            nums = _apply_spatial(
                p2d, block.pattern, table, 2, 1,
                pool=pool, tape=tape, tape_kw=kw,
            )
            return RationalPlane(nums, w_interp)

        ens = rotation_ensemble(one, sub)
        out[target[sp]] += _SUBPLANE_GAINS[sp] * ens.nums[0]
    return RationalPlane(out, 8 * w_interp)


def run_pipeline(
    spec: PipelineSpec,
    img: ImagePlane,
    threads: int | None = None,
    tape: list | None = None,
) -> ImagePlane:
    """Execute a bound pipeline on an image.

    threads=None uses one worker per logical core; any value yields
    byte-identical output. Passing a list as `tape` records every
    interpolation query into it (single-threaded path) for finetuning.
    """
    if not spec.bound:
        raise EngineError("pipeline has unbound LUT slots")
    if spec.task == "demosaic":
        if img.channels != 1:
            raise EngineError("demosaic input must be a 1-channel mosaic")
        if img.height % 2 or img.width % 2:
            raise EngineError("demosaic input needs even dimensions")
    elif spec.color_mode == "grayscale":
        if img.channels != 1:
            raise EngineError(f"{spec.color_mode} pipeline takes 1-channel input")
    else:
        if img.channels != 3:
            raise EngineError(f"{spec.color_mode} pipeline takes 3-channel input")

    ctx = _TapeCtx(tape) if tape is not None else None
    if threads is None:
        threads = os.cpu_count() or 1
    use_pool = threads > 1 and ctx is None

    executor = ThreadPoolExecutor(max_workers=threads) if use_pool else None
    pool = (executor, threads) if executor else None
    try:
        planes = [img.plane(c) for c in range(img.channels)]
        w_img = spec.grid.interval

        for si, stage in enumerate(spec.stages):
            if stage.blocks:
                kind = stage.kind
                in_shape = (len(planes), *planes[0].shape)
                if kind == "mosaic":
                    block = stage.blocks[0]
                    if ctx:
                        h, w = planes[0].shape
                        ctx.open("mosaic", si, w_img, in_shape, (3, h, w))
                    nums = _apply_mosaic(planes[0], block.lut_for(0), pool, ctx, (si, 0, 0))
                    out8 = _requant_array(nums, w_img)
                    planes = [out8[0], out8[1], out8[2]]
                elif kind == "subplane":
                    block = stage.blocks[0]
                    if ctx:
                        h, w = planes[0].shape
                        ctx.open("subplane", si, 8 * w_img, in_shape, (3, h, w))
                    rp = _run_subplane_stage(planes[0], block, pool, ctx, si)
                    out8 = _requant_array(rp.nums, rp.den)
                    planes = [out8[0], out8[1], out8[2]]
                else:
                    n_branches = len(stage.blocks)
                    den = w_img * 4 * n_branches
                    up = stage.upscale
                    if ctx:
                        h, w = planes[0].shape
                        ctx.open(
                            "spatial", si, den, in_shape,
                            (len(planes), h * up, w * up),
                        )
                    new_planes = []
                    for ci, plane in enumerate(planes):
                        branches = []
                        for bi, block in enumerate(stage.blocks):
                            table = block.lut_for(ci)
                            variant = ci if block.channel_distinct else 0

                            def one(p2d: np.ndarray, j: int, table=table, block=block,
                                    slot=(si, bi, variant), ci=ci) -> RationalPlane:
                                kw = dict(slot=slot, kind="spatial", channel=ci, rotation=j)
                                nums = _apply_spatial(
                                    p2d, block.pattern, table, block.upscale,
                                    block.out_channels, pool=pool, tape=ctx, tape_kw=kw,
                                )
                                return RationalPlane(nums, w_img)

                            branches.append(rotation_ensemble(one, plane))
                        fused = fuse_parallel(branches)
                        assert fused.den == den
                        new_planes.append(_requant_array(fused.nums, fused.den)[0])
                    planes = new_planes

            if stage.channel_block is not None:
                if len(planes) != 3:
                    raise EngineError("channel block requires 3 channels at its stage")
                block = stage.channel_block
                table = block.lut_for(0)
                arr3 = np.ascontiguousarray(np.stack(planes))
                if ctx:
                    ctx.open("channel", si, w_img, arr3.shape, arr3.shape)
                nums = _apply_channel(arr3, table, pool, ctx, (si, -1, 0))
                out8 = _requant_array(nums, w_img)
                planes = [out8[0], out8[1], out8[2]]

        return ImagePlane(np.stack(planes))
    finally:
        if executor:
            executor.shutdown(wait=True)
