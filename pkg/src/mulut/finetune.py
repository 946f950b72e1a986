"""Finetuning of LUT values through the interpolation arithmetic.

The forward pass is the ordinary engine run on materialized tables,
recorded onto a tape. Backward, every interpolation is the linear map it
is for a fixed simplex selection (d out / d value = weight / W), and the
inter-stage round-half-up requantization passes gradients through
unchanged (straight-through). Float shadow copies of every table value
carry the optimizer state; what the engine executes is always
round-half-up(clamp(shadow, 0, 255)).

Gradients accumulate in a fixed order (tape order within a patch, pairwise
tree reduction across the patch batch), so a seeded run is reproducible to
the bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ImagePlane, LutTable
from .engine import QueryRecord, TapeSegment, run_pipeline
from .pipelines import PipelineSpec

Slot = tuple[int, int, int]

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class FinetuneError(ValueError):
    """Dataset or geometry rejected, or the loss diverged."""


@dataclass
class FinetuneState:
    """Float shadows of every LUT payload plus Adam moments.

    Shadows live in the 0..255 value domain and mirror the payload layout
    exactly (flat, row-major over grid entries then record values). The
    optimizer works on shadow/255, so the configured learning rate is a
    step in the [0, 1] domain.
    """

    spec: PipelineSpec
    shadow: dict[Slot, np.ndarray]
    m1: dict[Slot, np.ndarray]
    m2: dict[Slot, np.ndarray]
    lr: float = 1e-4
    step: int = 0

    @classmethod
    def from_spec(cls, spec: PipelineSpec, lr: float = 1e-4) -> "FinetuneState":
        if not spec.bound:
            raise FinetuneError("finetuning needs a bound pipeline (initial tables)")
        blocks = {(si, bi): b for si, bi, b in spec.iter_blocks()}
        shadow: dict[Slot, np.ndarray] = {}
        for si, bi, v in spec.lut_slots():
            table = blocks[(si, bi)].lut_for(v)
            shadow[(si, bi, v)] = table.values.astype(np.float64)
        zeros = {slot: np.zeros_like(arr) for slot, arr in shadow.items()}
        return cls(
            spec=spec,
            shadow=shadow,
            m1=zeros,
            m2={slot: np.zeros_like(arr) for slot, arr in shadow.items()},
            lr=lr,
        )

    def materialized(self) -> PipelineSpec:
        """The executable pipeline: shadows clamped, rounded half-up, bound."""
        blocks = {(si, bi): b for si, bi, b in self.spec.iter_blocks()}
        tables = []
        for si, bi, v in self.spec.lut_slots():
            b = blocks[(si, bi)]
            vals = np.floor(np.clip(self.shadow[(si, bi, v)], 0.0, 255.0) + 0.5)
            tables.append(
                LutTable(n=b.n, m=b.m, grid=self.spec.grid, values=vals.astype(np.uint8))
            )
        return self.spec.bind(tables)


def forward_with_tape(
    spec: PipelineSpec, state: FinetuneState, img: ImagePlane
) -> tuple[ImagePlane, list]:
    """Engine forward on the state's materialized tables, with a query tape."""
    if not spec.structure_equals(state.spec):
        raise FinetuneError("pipeline structure does not match the finetune state")
    tape: list = []
    out = run_pipeline(state.materialized(), img, threads=1, tape=tape)
    return out, tape


# -- backward -------------------------------------------------------------------


def _unshuffle(g: np.ndarray, h: int, w: int, r: int, c_out: int) -> np.ndarray:
    # Inverse of the engine's pixel shuffle: (c_out, h*r, w*r) -> (h*w, c_out*r*r).
    a = g.reshape(c_out, h, r, w, r).transpose(1, 3, 0, 2, 4)
    return np.ascontiguousarray(a.reshape(h * w, c_out * r * r))


def _vertex_grads(
    rec: QueryRecord, g_vals: np.ndarray, grads: dict[Slot, np.ndarray]
) -> np.ndarray:
    """Scatter value grads onto the record's table; return per-input grads (n, P)."""
    table = rec.table
    values2d = table.values.reshape(-1, table.m)
    slot_grad = grads.get(rec.slot)
    if slot_grad is None:
        slot_grad = np.zeros(values2d.shape, dtype=np.float64)
        grads[rec.slot] = slot_grad
    steps, p = rec.flat.shape
    n = steps - 1
    w_total = table.grid.interval
    for k in range(steps):
        np.add.at(slot_grad, rec.flat[k], rec.weights[k][:, None] * g_vals)
    # d out / d x along the dim entering at sorted position k is the vertex
    # difference V_k - V_{k-1} (over W, which the caller's 1/den absorbed).
    gx = np.zeros((n, p), dtype=np.float64)
    cols = np.arange(p)
    prev = values2d[rec.flat[0]].astype(np.float64)
    for k in range(1, steps):
        cur = values2d[rec.flat[k]].astype(np.float64)
        gq = ((cur - prev) * g_vals).sum(axis=1)
        gx[rec.order[k - 1], cols] += gq
        prev = cur
    # The fraction is x & (W-1): slope 1 in x, so gx is already per input unit.
    del w_total
    return gx


def _scatter_pattern(
    g_plane: np.ndarray, gx: np.ndarray, rec: QueryRecord
) -> None:
    """Accumulate per-offset input grads into the (rotated-frame) plane."""
    h, w = rec.frame
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    for k, (dy, dx) in enumerate(rec.pattern.offsets):
        iy = np.minimum(ys + dy, h - 1)
        ix = np.minimum(xs + dx, w - 1)
        np.add.at(g_plane, (np.broadcast_to(iy, (h, w)), np.broadcast_to(ix, (h, w))),
                  gx[k].reshape(h, w))


_S_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _backward_segment(
    seg: TapeSegment, g_out: np.ndarray, grads: dict[Slot, np.ndarray]
) -> np.ndarray:
    g_nums = g_out / seg.den
    g_in = np.zeros(seg.in_shape, dtype=np.float64)
    for rec in seg.records:
        if rec.kind in ("spatial", "subplane"):
            h, w = rec.frame
            g_plane = g_nums[rec.channel]
            if rec.gain != 1:
                g_plane = g_plane * rec.gain
            g_rot = np.rot90(g_plane, rec.rotation) if rec.rotation else g_plane
            g_vals = _unshuffle(
                np.ascontiguousarray(g_rot)[None], h, w, rec.upscale, rec.out_channels
            )
            gx = _vertex_grads(rec, g_vals, grads)
            g_rot_in = np.zeros((h, w), dtype=np.float64)
            _scatter_pattern(g_rot_in, gx, rec)
            back = np.rot90(g_rot_in, -rec.rotation) if rec.rotation else g_rot_in
            if rec.kind == "spatial":
                g_in[rec.channel] += back
            else:
                py, px = _S_OFFSETS[rec.subplane]
                g_in[0][py::2, px::2] += back
        elif rec.kind == "mosaic":
            ah, aw = rec.frame
            g_vals = _unshuffle(g_nums, ah, aw, rec.upscale, rec.out_channels)
            gx = _vertex_grads(rec, g_vals, grads)
            for k, (dy, dx) in enumerate(_S_OFFSETS):
                g_in[0][dy::2, dx::2] += gx[k].reshape(ah, aw)
        elif rec.kind == "channel":
            h, w = rec.frame
            if rec.table.m == 3:
                g_vals = np.ascontiguousarray(g_nums.reshape(3, -1).T)
            else:
                g_vals = g_nums[rec.channel].reshape(-1, 1)
            gx = _vertex_grads(rec, g_vals, grads)
            for k in range(3):
                g_in[rec.perm[k]] += gx[k].reshape(h, w)
        else:
            raise FinetuneError(f"unknown tape record kind {rec.kind!r}")
    return g_in


def backward(tape: list, grad_output: np.ndarray) -> dict[Slot, np.ndarray]:
    """Walk the tape in reverse, returning float grads per LUT slot.

    grad_output is d loss / d (final uint8 output), shaped like the last
    segment's output. Returned arrays mirror each table's (entries, m)
    payload; flatten to match the shadow layout.
    """
    if not tape:
        raise FinetuneError("empty tape")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != tape[-1].out_shape:
        raise FinetuneError(
            f"grad shape {g.shape} != pipeline output {tape[-1].out_shape}"
        )
    grads: dict[Slot, np.ndarray] = {}
    for seg in reversed(tape):
        g = _backward_segment(seg, g, grads)
    return grads


def _tree_reduce(parts: list[dict[Slot, np.ndarray]]) -> dict[Slot, np.ndarray]:
    """Pairwise deterministic reduction of per-patch gradient dicts."""
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts) - 1, 2):
            a, b = parts[i], parts[i + 1]
            for slot, arr in b.items():
                if slot in a:
                    a[slot] = a[slot] + arr
                else:
                    a[slot] = arr
            merged.append(a)
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


# -- training loop ----------------------------------------------------------------


def _crop_pair(
    lq: ImagePlane,
    hq: ImagePlane,
    rng: np.random.Generator,
    patch: int,
    scale: int,
    even_align: bool,
) -> tuple[ImagePlane, ImagePlane]:
    p = min(patch, lq.height, lq.width)
    if even_align:
        p -= p % 2
    y_max, x_max = lq.height - p, lq.width - p
    y0 = int(rng.integers(0, y_max + 1))
    x0 = int(rng.integers(0, x_max + 1))
    if even_align:
        y0 -= y0 % 2
        x0 -= x0 % 2
    lq_c = ImagePlane(np.ascontiguousarray(lq.data[:, y0 : y0 + p, x0 : x0 + p]))
    hq_c = ImagePlane(
        np.ascontiguousarray(
            hq.data[:, y0 * scale : (y0 + p) * scale, x0 * scale : (x0 + p) * scale]
        )
    )
    return lq_c, hq_c


def adam_step(state: FinetuneState, grads: dict[Slot, np.ndarray]) -> None:
    """One Adam update on the shadows; grads are in the 0..255 value domain.

    The optimizer normalizes parameters to [0, 1] (shadow / 255), so the
    state's lr is a [0, 1]-domain step and the shadow moves by 255x that.
    """
    b1, b2 = ADAM_BETAS
    state.step += 1
    t = state.step
    for slot, shadow in state.shadow.items():
        g = grads.get(slot)
        if g is None:
            continue
        g = g.reshape(shadow.shape) * 255.0  # d loss / d (shadow / 255)
        m1 = state.m1[slot]
        m2 = state.m2[slot]
        m1 *= b1
        m1 += (1.0 - b1) * g
        m2 *= b2
        m2 += (1.0 - b2) * (g * g)
        m_hat = m1 / (1.0 - b1**t)
        v_hat = m2 / (1.0 - b2**t)
        shadow -= 255.0 * state.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def finetune(
    spec: PipelineSpec,
    pairs: list[tuple[ImagePlane, ImagePlane]],
    iters: int = 2000,
    lr: float = 1e-4,
    seed: int = 0,
    batch: int = 8,
    patch: int = 48,
    state: FinetuneState | None = None,
) -> tuple[FinetuneState, list[float]]:
    """Adam-finetune a bound pipeline's tables on paired LQ/HQ images.

    Minimizes MSE in the [0, 1] pixel domain. Returns the final state (use
    .materialized() for the runnable pipeline) and the per-iteration loss
    trace. Raises FinetuneError on geometry mismatches or a non-finite loss.
    """
    if not pairs:
        raise FinetuneError("dataset is empty")
    if state is None:
        state = FinetuneState.from_spec(spec, lr)
    else:
        state.lr = lr
    scale = 1 if spec.task == "demosaic" else spec.scale
    even_align = spec.task == "demosaic"
    for i, (lq, hq) in enumerate(pairs):
        want = spec.output_size(lq.height, lq.width)
        got = hq.data.shape
        if want != got:
            raise FinetuneError(
                f"pair {i}: HQ shape {got} does not match pipeline output {want}"
            )

    rng = np.random.default_rng(seed)
    losses: list[float] = []
    for it in range(iters):
        bound = state.materialized()
        parts: list[dict[Slot, np.ndarray]] = []
        loss_acc = 0.0
        for _ in range(batch):
            idx = int(rng.integers(0, len(pairs)))
            lq_c, hq_c = _crop_pair(*pairs[idx], rng, patch, scale, even_align)
            tape: list = []
            out = run_pipeline(bound, lq_c, threads=1, tape=tape)
            diff = out.data.astype(np.float64) - hq_c.data.astype(np.float64)
            loss_acc += float(np.mean(diff**2)) / 255.0**2
            g = (2.0 / (255.0**2 * diff.size * batch)) * diff
            parts.append(backward(tape, g))
        loss = loss_acc / batch
        if not np.isfinite(loss):
            raise FinetuneError(f"loss is not finite at iteration {it}: {loss}")
        losses.append(loss)
        adam_step(state, _tree_reduce(parts))
    return state, losses


def write_loss_csv(path: str, losses: list[float]) -> None:
    """Per-iteration loss trace in the `iter,loss` layout."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iter,loss\n")
        for i, value in enumerate(losses):
            fh.write(f"{i},{value:.10g}\n")
