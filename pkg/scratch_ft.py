import time

import numpy as np

from mulut.core import ImagePlane, LutTable
from mulut.engine import run_pipeline
from mulut.finetune import FinetuneState, backward, finetune, forward_with_tape
from mulut.pipelines import preset


def random_tables(spec, rng):
    tabs = []
    blocks = {(si, bi): b for si, bi, b in spec.iter_blocks()}
    for si, bi, v in spec.lut_slots():
        b = blocks[(si, bi)]
        size = spec.grid.levels**b.n * b.m
        tabs.append(
            LutTable(n=b.n, m=b.m, grid=spec.grid,
                     values=rng.integers(0, 256, size, dtype=np.uint8))
        )
    return tabs


# independent surrogate: frozen weights, float values, exact division
def shuffle_f(vals, h, w, r, c):
    return vals.reshape(h, w, c, r, r).transpose(2, 0, 3, 1, 4).reshape(c, h * r, w * r)


def surrogate_out(tape, shadows):
    assert len(tape) == 1
    seg = tape[0]
    nums = np.zeros(seg.out_shape)
    for rec in seg.records:
        vf = shadows[rec.slot].reshape(-1, rec.table.m)
        vals = np.zeros((rec.flat.shape[1], rec.table.m))
        for k in range(rec.flat.shape[0]):
            vals += rec.weights[k][:, None] * vf[rec.flat[k]]
        if rec.kind in ("spatial", "subplane"):
            h, w = rec.frame
            part = shuffle_f(vals, h, w, rec.upscale, rec.out_channels)
            part = np.rot90(part, -rec.rotation, axes=(1, 2))
            nums[rec.channel] += rec.gain * part[0]
        elif rec.kind == "mosaic":
            nums += shuffle_f(vals, *rec.frame, 2, 3)
        elif rec.table.m == 3:
            h, w = rec.frame
            nums = vals.T.reshape(3, h, w).astype(float)
        else:
            h, w = rec.frame
            nums[rec.channel] = vals[:, 0].reshape(h, w)
    return nums / seg.den


def surrogate_loss(tape, shadows, hq):
    d = surrogate_out(tape, shadows) - hq.data.astype(float)
    return float(np.mean(d * d)) / 255.0**2


spec = preset("SR-LUT", 2)
rng = np.random.default_rng(7)
teacher = spec.bind(random_tables(spec, rng))
student = spec.bind(random_tables(spec, np.random.default_rng(8)))

# --- FD check on the student, one 24x24 image ---
img = ImagePlane(rng.integers(0, 256, (1, 24, 24), dtype=np.uint8))
hq = run_pipeline(teacher, img)
state = FinetuneState.from_spec(student)
out, tape = forward_with_tape(spec, state, img)
diff = out.data.astype(float) - hq.data.astype(float)
g = 2.0 * diff / (255.0**2 * diff.size)
grads = backward(tape, g)
slot = (0, 0, 0)
gflat = grads[slot].reshape(-1)
idx = np.argsort(-np.abs(gflat))[:100]
eps = 0.5
worst = 0.0
for i in idx:
    sp = {k: v.copy() for k, v in state.shadow.items()}
    sp[slot] = sp[slot].copy()
    sp[slot][i] += eps
    lp = surrogate_loss(tape, sp, hq)
    sp[slot][i] -= 2 * eps
    lm = surrogate_loss(tape, sp, hq)
    fd = (lp - lm) / (2 * eps)
    rel = abs(fd - gflat[i]) / max(abs(fd), 1e-18)
    worst = max(worst, rel)
print(f"FD worst relative error over 100 top entries: {worst:.6f}")

# --- teacher-student speed + descent ---
pairs = []
for s in range(4):
    lq = ImagePlane(np.random.default_rng(100 + s).integers(0, 256, (1, 48, 48), dtype=np.uint8))
    pairs.append((lq, run_pipeline(teacher, lq)))

t0 = time.time()
st, losses = finetune(spec.bind(random_tables(spec, np.random.default_rng(8))),
                      pairs, iters=100, lr=1e-4, seed=3)
dt = time.time() - t0
print(f"100 iters in {dt:.1f}s -> 2000 iters ~ {dt * 20:.0f}s")
print(f"loss[0]={losses[0]:.6g} loss[99]={losses[-1]:.6g} "
      f"drop={(1 - losses[-1] / losses[0]) * 100:.1f}%")
