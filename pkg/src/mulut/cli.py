"""Command-line front end.

Subcommands:

    run       execute a pipeline on image files
    convert   cache a builtin function as a LUT file, or validate one
    finetune  gradient-finetune a pipeline's tables on paired data
    eval      image quality metrics on file pairs
    degrade   synthesize degraded inputs
    cost      operation counts and energy estimate

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 validation failure.
The MULUT_SEED environment variable supplies the default seed wherever a
command accepts --seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .core import PATTERNS, SamplingGrid
from .costmodel import count_ops, report_csv, report_table
from .engine import run_pipeline
from .evalkit import DEGRADE_KINDS, cpsnr, degrade, psnr, psnr_b, ssim, y_channel
from .finetune import finetune, write_loss_csv
from .imageio import ImageFormatError, read_image, write_image
from .lutio import StageRole, read_lut_file, write_lut_file
from .pipelines import (
    PRESET_NAMES,
    parse_config_file,
    preset,
    slot_filenames,
    write_config,
)
from .transfer import (
    BUILTIN_FUNCTIONS,
    builtin_function,
    cache_function_vectorized,
    validate_import,
)

_IMAGE_EXTENSIONS = (".pgm", ".ppm", ".pnm", ".png")

_ROLES = {
    "intermediate": StageRole.SPATIAL_INTERMEDIATE,
    "output": StageRole.SPATIAL_OUTPUT,
    "channel": StageRole.CHANNEL,
}


def _env_seed() -> int:
    raw = os.environ.get("MULUT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"MULUT_SEED must be an integer, got {raw!r}") from None


def _size_type(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        w, h = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"size must look like 1280x720, got {text!r}"
        ) from None
    return w, h


def _preset_spec(args):
    return preset(
        args.preset,
        args.scale,
        task=args.task,
        q=args.q,
    )


def _bind_from_dir(spec, directory: str):
    tables = []
    for fname in slot_filenames(spec):
        record = read_lut_file(os.path.join(directory, fname))
        tables.append(record.table)
    return spec.bind(tables)


# -- run -----------------------------------------------------------------------


def _cmd_run(args) -> int:
    if args.config:
        spec = parse_config_file(args.config)
    else:
        if args.luts is None:
            raise ValueError("--preset needs --luts DIR to load tables from")
        spec = _bind_from_dir(_preset_spec(args), args.luts)
    inputs = args.input
    if len(inputs) == 1 and not os.path.isdir(args.output):
        targets = [args.output]
    else:
        os.makedirs(args.output, exist_ok=True)
        targets = [os.path.join(args.output, os.path.basename(p)) for p in inputs]
    for src, dst in zip(inputs, targets):
        out = run_pipeline(spec, read_image(src), threads=args.threads)
        write_image(dst, out)
        print(f"{src} -> {dst}")
    return 0


# -- convert ---------------------------------------------------------------------


def _cmd_convert(args) -> int:
    if args.validate is not None:
        with open(args.validate, "rb") as fh:
            data = fh.read()
        grid = SamplingGrid(args.q) if args.q is not None else None
        diagnostics = validate_import(data, grid=grid)
        if diagnostics:
            for line in diagnostics:
                print(f"{args.validate}: {line}", file=sys.stderr)
            return 3
        print(f"{args.validate}: ok")
        return 0

    if args.out is None:
        raise ValueError("--function needs --out FILE")
    q = 4 if args.q is None else args.q
    fn, n, m = builtin_function(args.function, upscale=args.upscale)
    table = cache_function_vectorized(fn, n, m, q)
    if n == 3:
        role, pattern = StageRole.CHANNEL, None
    else:
        role = _ROLES[args.role or "output"]
        pattern = PATTERNS[args.pattern]
    write_lut_file(args.out, table, role, pattern=pattern, upscale=args.upscale)
    print(f"wrote {args.out} ({os.path.getsize(args.out)} bytes)")
    return 0


# -- finetune ---------------------------------------------------------------------


def _load_pairs(data_arg: str):
    parts = data_arg.split(",")
    if len(parts) != 2:
        raise ValueError(f"--data takes LQ-DIR,HQ-DIR, got {data_arg!r}")
    lq_dir, hq_dir = parts
    names = sorted(
        f for f in os.listdir(lq_dir) if f.lower().endswith(_IMAGE_EXTENSIONS)
    )
    if not names:
        raise ValueError(f"no image files in {lq_dir}")
    pairs = []
    for name in names:
        hq_path = os.path.join(hq_dir, name)
        if not os.path.exists(hq_path):
            raise ValueError(f"{name} present in {lq_dir} but missing from {hq_dir}")
        pairs.append((read_image(os.path.join(lq_dir, name)), read_image(hq_path)))
    return pairs


def _cmd_finetune(args) -> int:
    spec = parse_config_file(args.config)
    pairs = _load_pairs(args.data)
    seed = _env_seed() if args.seed is None else args.seed
    state, losses = finetune(
        spec,
        pairs,
        iters=args.iters,
        lr=args.lr,
        seed=seed,
        batch=args.batch,
        patch=args.patch,
    )
    cfg_path = write_config(state.materialized(), args.out)
    write_loss_csv(os.path.join(args.out, "loss.csv"), losses)
    print(f"loss {losses[0]:.6g} -> {losses[-1]:.6g} over {args.iters} iterations")
    print(f"wrote {cfg_path} and {os.path.join(args.out, 'loss.csv')}")
    return 0


# -- eval / degrade ------------------------------------------------------------


def _cmd_eval(args) -> int:
    if len(args.images) % 2:
        raise ValueError("eval takes image pairs: REF TEST [REF TEST ...]")
    for i in range(0, len(args.images), 2):
        a = read_image(args.images[i])
        b = read_image(args.images[i + 1])
        if args.y_channel:
            if a.channels == 3:
                a = y_channel(a)
            if b.channels == 3:
                b = y_channel(b)
        if args.metric == "psnr":
            value = psnr(a, b)
        elif args.metric == "cpsnr":
            value = cpsnr(a, b)
        elif args.metric == "ssim":
            value = ssim(a, b)
        else:
            value = psnr_b(a, b, block=args.block)
        print("inf" if math.isinf(value) else f"{value:.6f}")
    return 0


def _cmd_degrade(args) -> int:
    seed = _env_seed() if args.seed is None else args.seed
    img = read_image(args.input)
    out = degrade(img, args.kind, scale=args.scale, sigma=args.sigma, seed=seed)
    write_image(args.output, out)
    return 0


# -- cost -----------------------------------------------------------------------


def _cmd_cost(args) -> int:
    if args.config:
        spec = parse_config_file(args.config)
    else:
        spec = _preset_spec(args)
    w, h = args.size
    counts = count_ops(spec, w, h)
    report = report_csv(counts) if args.csv else report_table(counts)
    print(report, end="")
    return 0


# -- parser ----------------------------------------------------------------------


def _add_spec_source(p, require: bool = True) -> None:
    group = p.add_mutually_exclusive_group(required=require)
    group.add_argument("--config", help="pipeline configuration file")
    group.add_argument("--preset", choices=PRESET_NAMES, help="built-in pipeline shape")
    p.add_argument("--scale", type=int, default=2, help="upscaling factor (presets)")
    p.add_argument("--task", help="task override for presets (sr, denoise, deblock, demosaic)")
    p.add_argument("--q", type=int, default=4, help="sampling exponent for presets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mulut", description="Multi-LUT image restoration toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a pipeline on images")
    _add_spec_source(p)
    p.add_argument("--luts", help="directory of LUT files for --preset runs")
    p.add_argument("--input", nargs="+", required=True, help="input image file(s)")
    p.add_argument("--output", required=True, help="output file, or directory for several inputs")
    p.add_argument("--threads", type=int, default=None, help="row-band worker count")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("convert", help="cache a builtin function as a LUT, or validate a LUT file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--function", choices=BUILTIN_FUNCTIONS, help="builtin to cache")
    group.add_argument("--validate", metavar="FILE", help="LUT file to validate")
    p.add_argument("--q", type=int, default=None, help="sampling exponent (default 4)")
    p.add_argument("--pattern", choices=sorted(PATTERNS), default="S", help="spatial pattern")
    p.add_argument("--upscale", type=int, default=1, help="upscale factor r")
    p.add_argument("--role", choices=sorted(_ROLES), help="header role (default: output)")
    p.add_argument("--out", help="output LUT path")
    p.set_defaults(handler=_cmd_convert)

    p = sub.add_parser("finetune", help="finetune a pipeline's tables on paired images")
    p.add_argument("--config", required=True, help="pipeline configuration file")
    p.add_argument("--data", required=True, help="LQ-DIR,HQ-DIR with matching file names")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=None, help="sampling seed (default: MULUT_SEED or 0)")
    p.add_argument("--batch", type=int, default=8, help="patches per iteration")
    p.add_argument("--patch", type=int, default=48, help="square patch side")
    p.add_argument("--out", required=True, help="directory for updated LUTs + loss.csv")
    p.set_defaults(handler=_cmd_finetune)

    p = sub.add_parser("eval", help="image quality metrics")
    p.add_argument("--metric", required=True, choices=("psnr", "cpsnr", "ssim", "psnrb"))
    p.add_argument("--y-channel", action="store_true", help="compare BT.601 luma instead of RGB")
    p.add_argument("--block", type=int, default=8, help="block size for psnrb")
    p.add_argument("images", nargs="+", help="REF TEST [REF TEST ...]")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("degrade", help="synthesize degraded inputs")
    p.add_argument("--kind", required=True, choices=DEGRADE_KINDS)
    p.add_argument("--scale", type=int, default=None, help="factor for bicubic-down")
    p.add_argument("--sigma", type=float, default=None, help="noise level for awgn")
    p.add_argument("--seed", type=int, default=None, help="noise seed (default: MULUT_SEED or 0)")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(handler=_cmd_degrade)

    p = sub.add_parser("cost", help="operation counts and energy estimate")
    _add_spec_source(p)
    p.add_argument("--size", type=_size_type, required=True, help="input size as WxH")
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    p.set_defaults(handler=_cmd_cost)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.handler(args)
    except (OSError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
