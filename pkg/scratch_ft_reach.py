import time

import numpy as np

from mulut.core import ImagePlane, LutTable
from mulut.engine import run_pipeline
from mulut.finetune import finetune
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


def perturbed(tables, rng, delta):
    out = []
    for t in tables:
        vals = t.values.astype(np.int64) + rng.integers(-delta, delta + 1, t.values.size)
        out.append(LutTable(n=t.n, m=t.m, grid=t.grid,
                            values=np.clip(vals, 0, 255).astype(np.uint8)))
    return out


spec = preset("SR-LUT", 2)
teacher_tabs = random_tables(spec, np.random.default_rng(7))
teacher = spec.bind(teacher_tabs)
student = spec.bind(perturbed(teacher_tabs, np.random.default_rng(8), 24))

pairs = []
for s in range(4):
    lq = ImagePlane(np.random.default_rng(100 + s).integers(0, 256, (1, 48, 48), dtype=np.uint8))
    pairs.append((lq, run_pipeline(teacher, lq)))

t0 = time.time()
state = None
losses = []
hit = None
for chunk in range(8):
    state, part = finetune(spec.bind(perturbed(teacher_tabs, np.random.default_rng(8), 24)) if state is None else spec,
                           pairs, iters=250, lr=1e-4, seed=chunk, state=state)
    losses.extend(part)
    drop = 1 - losses[-1] / losses[0]
    print(f"iter {len(losses)}: loss {losses[-1]:.6g} drop {drop*100:.1f}% ({time.time()-t0:.0f}s)")
    if hit is None and drop >= 0.9:
        hit = len(losses)
print(f"90% reached at iter ~{hit}, total {time.time()-t0:.0f}s")
