"""Multi-LUT image restoration: execution, construction, and finetuning of
sampled look-up-table networks for super-resolution, denoising, deblocking,
and demosaicing."""

from .core import (
    ImagePlane,
    LutTable,
    Pattern,
    PATTERNS,
    SamplingGrid,
    lut_size_bytes,
)
from .costmodel import EnergyTable, count_ops, estimate_energy
from .engine import run_pipeline
from .evalkit import cpsnr, degrade, psnr, psnr_b, ssim, y_channel
from .finetune import FinetuneState, backward, finetune, forward_with_tape
from .imageio import read_image, write_image
from .lutio import StageRole, read_lut, write_lut
from .pipelines import PipelineSpec, parse_config, preset
from .transfer import builtin_function, cache_function, validate_import

__version__ = "0.1.0"

__all__ = [
    "EnergyTable",
    "FinetuneState",
    "ImagePlane",
    "LutTable",
    "Pattern",
    "PATTERNS",
    "PipelineSpec",
    "SamplingGrid",
    "StageRole",
    "backward",
    "builtin_function",
    "cache_function",
    "count_ops",
    "cpsnr",
    "degrade",
    "estimate_energy",
    "finetune",
    "forward_with_tape",
    "lut_size_bytes",
    "parse_config",
    "preset",
    "psnr",
    "psnr_b",
    "read_image",
    "read_lut",
    "run_pipeline",
    "ssim",
    "validate_import",
    "write_image",
    "write_lut",
    "y_channel",
    "__version__",
]
