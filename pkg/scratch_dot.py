import sys

import numpy as np

sys.path.insert(0, "tests")
from conftest import bound_preset, gray_image, replay_loss, replay_output, rgb_image

from mulut.core import ImagePlane
from mulut.finetune import FinetuneState, backward, forward_with_tape
from mulut.pipelines import preset

rng = np.random.default_rng(11)

cases = [
    ("SR-LUT", 2, None, "gray"),
    ("MuLUT-SDY-X2", 1, None, "gray"),
    ("MuLUT-SDYEHO-X2-C", 1, None, "rgb"),
    ("MuLUT-SDY-X2-C", 2, "demosaic", "mosaic"),
    ("Baseline-A", 2, "demosaic", "mosaic"),
]

for name, scale, task, kind in cases:
    spec = bound_preset(name, scale, seed=id(name) % 1000, task=task)
    if kind == "gray":
        img = gray_image(rng, 20, 20)
    elif kind == "rgb":
        img = rgb_image(rng, 20, 20)
    else:
        img = gray_image(rng, 20, 20)
    state = FinetuneState.from_spec(spec)
    out, tape = forward_with_tape(spec, state, img)
    base = {k: v.copy() for k, v in state.shadow.items()}

    y0 = replay_output(tape, base, base)
    # single-segment sanity: rounding the float replay reproduces the engine
    if len(tape) == 1:
        r = np.clip(np.floor(y0 + 0.5), 0, 255).astype(np.uint8)
        print(f"{name}: replay==engine after rounding: {np.array_equal(r, out.data)}")

    hq = ImagePlane(rng.integers(0, 256, out.data.shape, dtype=np.uint8))
    g = 2.0 * (y0 - hq.data.astype(float)) / (255.0**2 * y0.size)
    grads = backward(tape, g)

    dv = {k: rng.standard_normal(v.shape) for k, v in base.items()}
    eps = 0.5
    plus = {k: base[k] + eps * dv[k] for k in base}
    minus = {k: base[k] - eps * dv[k] for k in base}
    fd = (replay_loss(tape, plus, hq, base=base) - replay_loss(tape, minus, hq, base=base)) / (2 * eps)
    dot = sum(float(np.sum(grads[k].reshape(-1) * dv[k])) for k in grads)
    rel = abs(fd - dot) / max(abs(fd), 1e-18)
    print(f"{name:20s} fd {fd:+.9e}  dot {dot:+.9e}  rel {rel:.3e}")
