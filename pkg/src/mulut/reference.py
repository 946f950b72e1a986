"""Naive scalar re-implementation of pipeline execution, for tests only.

Everything here is deliberately written without the engine's vectorized
machinery: images are lists of lists, interpolation is a per-pixel loop with
an explicit sort, rotations are index-shuffling comprehensions. Accumulation
uses double-precision floats (integer-valued throughout, so exact) and the
final division is done on Python integers. The engine must agree with this
module bit for bit on every input.
"""

from __future__ import annotations

import numpy as np

from .core import ImagePlane
from .pipelines import PipelineSpec


def _simplex(vals, levels, m, q, x):
    """Sorted-fraction simplex interpolation; returns m float numerators over 2**q."""
    n = len(x)
    w_step = 2**q
    cell = [xi >> q for xi in x]
    frac = [xi & (w_step - 1) for xi in x]

    order = sorted(range(n), key=lambda d: (-frac[d], d))
    sorted_frac = [frac[d] for d in order]

    weights = [w_step - sorted_frac[0]]
    for k in range(1, n):
        weights.append(sorted_frac[k - 1] - sorted_frac[k])
    weights.append(sorted_frac[n - 1])

    strides = [levels ** (n - 1 - d) for d in range(n)]
    flat = 0
    for d in range(n):
        flat += cell[d] * strides[d]

    out = [0.0] * m
    for c in range(m):
        out[c] = weights[0] * int(vals[flat * m + c])
    for k in range(n):
        flat += strides[order[k]]
        wk = weights[k + 1]
        for c in range(m):
            out[c] += wk * int(vals[flat * m + c])
    return out


def _rot_ccw(g):
    h, w = len(g), len(g[0])
    return [[g[j][w - 1 - i] for j in range(h)] for i in range(w)]


def _rot(g, k):
    for _ in range(k % 4):
        g = _rot_ccw(g)
    return g


def _apply_spatial_plane(plane, vals, levels, m, q, offsets, r, c_out):
    """One spatial LUT over a plane: gather, interpolate, pixel-shuffle."""
    h, w = len(plane), len(plane[0])
    out = [[[0.0] * (w * r) for _ in range(h * r)] for _ in range(c_out)]
    for y in range(h):
        for x in range(w):
            query = [
                plane[min(y + dy, h - 1)][min(x + dx, w - 1)] for dy, dx in offsets
            ]
            cell_vals = _simplex(vals, levels, m, q, query)
            for k in range(m):
                c, rem = divmod(k, r * r)
                a, b = divmod(rem, r)
                out[c][y * r + a][x * r + b] = cell_vals[k]
    return out


def _requant(num, den):
    n = int(num)
    v = (2 * n + den) // (2 * den)
    return 0 if v < 0 else 255 if v > 255 else v


def _spatial_stage_plane(plane, blocks_data, q, r):
    """Ensemble + fusion for one routed plane; returns a uint8 plane."""
    h, w = len(plane), len(plane[0])
    n_branches = len(blocks_data)
    den = (2**q) * 4 * n_branches
    acc = [[0.0] * (w * r) for _ in range(h * r)]
    for vals, levels, m, offsets in blocks_data:
        for j in range(4):
            rotated = _rot(plane, j)
            part = _apply_spatial_plane(rotated, vals, levels, m, q, offsets, r, 1)
            back = _rot(part[0], 4 - j)
            for y in range(h * r):
                row_acc, row_back = acc[y], back[y]
                for x in range(w * r):
                    row_acc[x] += row_back[x]
    return [[_requant(acc[y][x], den) for x in range(w * r)] for y in range(h * r)]


def _channel_stage(planes, vals, levels, m, q):
    h, w = len(planes[0]), len(planes[0][0])
    den = 2**q
    out = [[[0] * w for _ in range(h)] for _ in range(3)]
    for y in range(h):
        for x in range(w):
            rgb = [planes[c][y][x] for c in range(3)]
            if m == 3:
                res = _simplex(vals, levels, 3, q, rgb)
                for c in range(3):
                    out[c][y][x] = _requant(res[c], den)
            else:
                for c in range(3):
                    query = [rgb[c], rgb[(c + 1) % 3], rgb[(c + 2) % 3]]
                    res = _simplex(vals, levels, 1, q, query)
                    out[c][y][x] = _requant(res[0], den)
    return out


def _mosaic_stage(plane, vals, levels, q):
    h, w = len(plane), len(plane[0])
    den = 2**q
    out = [[[0] * w for _ in range(h)] for _ in range(3)]
    for ay in range(h // 2):
        for ax in range(w // 2):
            query = [
                plane[2 * ay][2 * ax],
                plane[2 * ay][2 * ax + 1],
                plane[2 * ay + 1][2 * ax],
                plane[2 * ay + 1][2 * ax + 1],
            ]
            res = _simplex(vals, levels, 12, q, query)
            for k in range(12):
                c, rem = divmod(k, 4)
                a, b = divmod(rem, 2)
                out[c][2 * ay + a][2 * ax + b] = _requant(res[k], den)
    return out


def _subplane_stage(plane, vals, levels, q, offsets):
    h, w = len(plane), len(plane[0])
    den = 8 * (2**q)
    gains = (2, 1, 1, 2)
    targets = (0, 1, 1, 2)
    acc = [[[0.0] * w for _ in range(h)] for _ in range(3)]
    phases = ((0, 0), (0, 1), (1, 0), (1, 1))
    for sp, (py, px) in enumerate(phases):
        sub = [[plane[2 * y + py][2 * x + px] for x in range(w // 2)] for y in range(h // 2)]
        for j in range(4):
            rotated = _rot(sub, j)
            part = _apply_spatial_plane(rotated, vals, levels, 4, q, offsets, 2, 1)
            back = _rot(part[0], 4 - j)
            t = targets[sp]
            g = gains[sp]
            for y in range(h):
                for x in range(w):
                    acc[t][y][x] += g * back[y][x]
    return [
        [[_requant(acc[c][y][x], den) for x in range(w)] for y in range(h)]
        for c in range(3)
    ]


def reference_evaluate(spec: PipelineSpec, img: ImagePlane) -> ImagePlane:
    """Scalar mirror of engine.run_pipeline; used as the bit-exactness oracle."""
    if not spec.bound:
        raise ValueError("pipeline has unbound LUT slots")
    q = spec.grid.q

    planes = [img.plane(c).tolist() for c in range(img.channels)]

    def table_vals(t):
        # Indexed one scalar at a time; kept as the stored array so huge
        # low-q tables do not balloon into Python lists.
        return t.values

    for stage in spec.stages:
        if stage.blocks:
            kind = stage.kind
            if kind == "mosaic":
                t = stage.blocks[0].lut_for(0)
                planes = _mosaic_stage(planes[0], table_vals(t), t.grid.levels, q)
            elif kind == "subplane":
                b = stage.blocks[0]
                t = b.lut_for(0)
                planes = _subplane_stage(
                    planes[0], table_vals(t), t.grid.levels, q, b.pattern.offsets
                )
            else:
                r = stage.upscale
                new_planes = []
                for ci, plane in enumerate(planes):
                    blocks_data = []
                    for b in stage.blocks:
                        t = b.lut_for(ci)
                        blocks_data.append(
                            (table_vals(t), t.grid.levels, t.m, b.pattern.offsets)
                        )
                    new_planes.append(_spatial_stage_plane(plane, blocks_data, q, r))
                planes = new_planes
        if stage.channel_block is not None:
            t = stage.channel_block.lut_for(0)
            planes = _channel_stage(planes, table_vals(t), t.grid.levels, t.m, q)

    arr = np.array(planes, dtype=np.uint8)
    return ImagePlane(arr)
