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


spec = preset("SR-LUT", 2)
teacher = spec.bind(random_tables(spec, np.random.default_rng(7)))
pairs = []
for s in range(4):
    lq = ImagePlane(np.random.default_rng(100 + s).integers(0, 256, (1, 48, 48), dtype=np.uint8))
    pairs.append((lq, run_pipeline(teacher, lq)))

t0 = time.time()
st, losses = finetune(spec.bind(random_tables(spec, np.random.default_rng(8))),
                      pairs, iters=2000, lr=1e-4, seed=3)
dt = time.time() - t0
for mark in (0, 100, 500, 1000, 1500, 1999):
    print(f"iter {mark}: loss {losses[mark]:.6g}")
print(f"2000 iters in {dt:.1f}s")
print(f"drop: {(1 - losses[-1] / losses[0]) * 100:.2f}%")
