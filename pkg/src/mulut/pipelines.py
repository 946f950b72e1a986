"""Pipeline presets and the staged-graph configuration format.

A pipeline is an ordered list of stages. Each stage holds a set of parallel
spatial blocks (fused by averaging) and an optional trailing channel block;
stage outputs are re-quantized to uint8 before feeding the next stage.

Block kinds:

    spatial   4D LUT over a pattern's 4 pixels, every pixel an anchor
    mosaic    4D LUT over 2x2 Bayer cells at stride 2 (demosaic stage 1),
              emitting 2x-upscaled 3-channel output (m = 12)
    subplane  4D LUT applied independently to the four Bayer subsampled
              planes (demosaic Baseline-A), green pair averaged
    channel   3D LUT over (R, G, B), no spatial coupling

Color modes: `grayscale` runs single-channel; `per-channel` routes R, G, B
through the same spatial LUTs independently; `per-channel+channel-LUT`
additionally gives each channel its own spatial LUTs and adds channel
blocks for cross-channel interaction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .core import PATTERNS, ImagePlane, LutTable, Pattern, SamplingGrid, lut_size_bytes
from .lutio import LutRecord, StageRole, read_lut_file

COLOR_MODES = ("grayscale", "per-channel", "per-channel+channel-LUT")
TASKS = ("sr", "denoise", "deblock", "demosaic", "custom")


class PipelineError(ValueError):
    """A pipeline spec violates its invariants."""


class ConfigError(ValueError):
    """Configuration document rejected; carries file/line context."""

    def __init__(self, message: str, path: str = "<config>", line: int = 0, fieldname: str = ""):
        self.path = path
        self.line = line
        self.fieldname = fieldname
        where = f"{path}:{line}" if line else path
        tag = f" (field {fieldname})" if fieldname else ""
        super().__init__(f"{where}: {message}{tag}")


@dataclass(frozen=True)
class BlockSpec:
    """One LUT application inside a stage.

    `m` is the LUT's values-per-entry; for spatial kinds m = upscale**2 *
    out_channels. `luts` holds one table, or three when the color mode gives
    each channel its own (channel-distinct blocks); None while unbound.
    """

    kind: str
    pattern: Pattern | None
    upscale: int
    out_channels: int
    m: int
    role: StageRole
    channel_distinct: bool = False
    luts: tuple[LutTable, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("spatial", "mosaic", "subplane", "channel"):
            raise PipelineError(f"unknown block kind {self.kind!r}")
        if self.kind == "channel":
            if self.pattern is not None:
                raise PipelineError("channel blocks carry no pattern")
            if self.upscale != 1:
                raise PipelineError("channel blocks do not upscale")
            if self.m not in (1, 3):
                raise PipelineError(f"channel block m={self.m} not in (1, 3)")
            if self.out_channels != 3:
                raise PipelineError("channel blocks emit 3 channels")
        else:
            if self.pattern is None:
                raise PipelineError(f"{self.kind} block requires a pattern")
            if self.upscale < 1:
                raise PipelineError(f"upscale {self.upscale} must be >= 1")
            if self.m != self.upscale**2 * self.out_channels:
                raise PipelineError(
                    f"m={self.m} != upscale**2 * out_channels = "
                    f"{self.upscale**2 * self.out_channels}"
                )
            if self.kind == "mosaic" and (self.upscale, self.out_channels) != (2, 3):
                raise PipelineError("mosaic blocks are upscale=2, out_channels=3")
            if self.kind == "subplane" and (self.upscale, self.out_channels) != (2, 1):
                raise PipelineError("subplane blocks are upscale=2, out_channels=1")
        if self.luts is not None:
            expected = 3 if self.channel_distinct else 1
            if len(self.luts) != expected:
                raise PipelineError(
                    f"block binds {len(self.luts)} tables, expected {expected}"
                )
            n_want = 3 if self.kind == "channel" else 4
            for t in self.luts:
                if t.n != n_want or t.m != self.m:
                    raise PipelineError(
                        f"table (n={t.n}, m={t.m}) does not match block "
                        f"(n={n_want}, m={self.m})"
                    )

    @property
    def n(self) -> int:
        return 3 if self.kind == "channel" else 4

    @property
    def ensemble(self) -> bool:
        # Mosaic and channel blocks skip the rotation ensemble: a Bayer
        # mosaic is not rotation-invariant (R and B would swap roles) and
        # channel blocks have no spatial footprint.
        return self.kind in ("spatial", "subplane")

    def lut_for(self, channel: int) -> LutTable:
        if self.luts is None:
            raise PipelineError("block is unbound (no tables attached)")
        return self.luts[channel if self.channel_distinct else 0]


@dataclass(frozen=True)
class StageSpec:
    """Parallel spatial blocks plus an optional trailing channel block."""

    blocks: tuple[BlockSpec, ...]
    channel_block: BlockSpec | None = None

    def __post_init__(self) -> None:
        kinds = {b.kind for b in self.blocks}
        if "channel" in kinds:
            raise PipelineError("channel blocks go in the channel_block slot")
        if len(kinds) > 1:
            raise PipelineError(f"mixed block kinds in one stage: {sorted(kinds)}")
        if len({(b.upscale, b.out_channels) for b in self.blocks}) > 1:
            raise PipelineError("parallel blocks must agree on upscale and out_channels")
        if kinds == {"spatial"} and any(b.out_channels != 1 for b in self.blocks):
            raise PipelineError("spatial stages emit one channel per routed plane")
        if self.channel_block is not None and self.channel_block.kind != "channel":
            raise PipelineError("channel_block slot requires a channel block")
        if not self.blocks and self.channel_block is None:
            raise PipelineError("empty stage")

    @property
    def upscale(self) -> int:
        return self.blocks[0].upscale if self.blocks else 1

    @property
    def kind(self) -> str:
        return self.blocks[0].kind if self.blocks else "channel"


@dataclass(frozen=True)
class PipelineSpec:
    """A validated staged LUT graph."""

    task: str
    scale: int
    color_mode: str
    grid: SamplingGrid
    stages: tuple[StageSpec, ...]
    name: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise PipelineError(f"unknown task {self.task!r}")
        if self.color_mode not in COLOR_MODES:
            raise PipelineError(f"unknown color_mode {self.color_mode!r}")
        if len(self.stages) < 1:
            raise PipelineError("pipeline needs at least one stage")
        spatial_stages = [s for s in self.stages if s.blocks]
        for i, s in enumerate(spatial_stages):
            if s.upscale > 1 and s.kind == "spatial" and s is not spatial_stages[-1]:
                raise PipelineError(
                    "only the final spatial stage may upscale "
                    f"(stage {i + 1} has upscale {s.upscale})"
                )
        if self.task == "demosaic":
            first = self.stages[0]
            if first.kind not in ("mosaic", "subplane"):
                raise PipelineError("demosaic pipelines start with a mosaic or subplane stage")
            for s in self.stages[1:]:
                if s.kind not in ("spatial", "channel"):
                    raise PipelineError("only stage 1 may be a mosaic/subplane stage")
        else:
            for s in self.stages:
                if s.kind in ("mosaic", "subplane"):
                    raise PipelineError(f"{s.kind} stages only appear in demosaic pipelines")
        total_up = 1
        for s in self.stages:
            total_up *= s.upscale
        expected = 2 if self.task == "demosaic" else self.scale
        if self.stages and total_up != expected:
            raise PipelineError(
                f"stage upscales multiply to {total_up}, expected {expected}"
            )
        for stage in self.stages:
            for b in list(stage.blocks) + ([stage.channel_block] if stage.channel_block else []):
                if b.luts is not None:
                    for t in b.luts:
                        if t.grid != self.grid:
                            raise PipelineError(
                                f"table sampled at q={t.grid.q}, pipeline uses q={self.grid.q}"
                            )

    # -- shape -------------------------------------------------------------

    @property
    def bound(self) -> bool:
        return all(b.luts is not None for _, _, b in self.iter_blocks())

    def iter_blocks(self) -> Iterator[tuple[int, int, BlockSpec]]:
        """Yields (stage index, block index, block); channel block last with index -1."""
        for si, stage in enumerate(self.stages):
            for bi, b in enumerate(stage.blocks):
                yield si, bi, b
            if stage.channel_block is not None:
                yield si, -1, stage.channel_block

    def lut_slots(self) -> list[tuple[int, int, int]]:
        """Orderly (stage, block, variant) addresses of every LUT file."""
        slots = []
        for si, bi, b in self.iter_blocks():
            for v in range(3 if b.channel_distinct else 1):
                slots.append((si, bi, v))
        return slots

    def bind(self, tables: list[LutTable]) -> "PipelineSpec":
        """Attach tables in lut_slots() order, returning a bound spec."""
        slots = self.lut_slots()
        if len(tables) != len(slots):
            raise PipelineError(f"got {len(tables)} tables for {len(slots)} slots")
        by_block: dict[tuple[int, int], list[LutTable]] = {}
        for (si, bi, _), t in zip(slots, tables):
            by_block.setdefault((si, bi), []).append(t)
        stages = []
        for si, stage in enumerate(self.stages):
            blocks = tuple(
                replace(b, luts=tuple(by_block[(si, bi)])) for bi, b in enumerate(stage.blocks)
            )
            cb = stage.channel_block
            if cb is not None:
                cb = replace(cb, luts=tuple(by_block[(si, -1)]))
            stages.append(StageSpec(blocks, cb))
        return replace(self, stages=tuple(stages))

    def expected_payload_bytes(self) -> int:
        """Closed-form total LUT payload across all slots."""
        total = 0
        for _, _, b in self.iter_blocks():
            copies = 3 if b.channel_distinct else 1
            total += copies * lut_size_bytes(self.grid.q, b.n, b.m)
        return total

    def output_size(self, height: int, width: int) -> tuple[int, int, int]:
        """(channels, height, width) of the pipeline output for a given input."""
        if self.task == "demosaic":
            return (3, height, width)
        c = 1 if self.color_mode == "grayscale" else 3
        return (c, height * self.scale, width * self.scale)

    def receptive_field(self) -> int | None:
        """One output anchor's RF side length; None when not a plain spatial cascade."""
        reach = 0
        for stage in self.stages:
            if stage.kind != "spatial":
                return None
            reach += max(b.pattern.reach for b in stage.blocks)
        return 2 * reach + 1

    def structure_equals(self, other: "PipelineSpec") -> bool:
        """Equality ignoring bound table payloads."""

        def skeleton(spec: PipelineSpec):
            return (
                spec.task,
                spec.scale,
                spec.color_mode,
                spec.grid,
                tuple(
                    (si, bi, b.kind, b.pattern, b.upscale, b.out_channels, b.m, b.role, b.channel_distinct)
                    for si, bi, b in spec.iter_blocks()
                ),
            )

        return skeleton(self) == skeleton(other)


# -- presets ----------------------------------------------------------------


def _spatial_stage(
    pattern_ids: str,
    upscale: int,
    role: StageRole,
    channel_distinct: bool = False,
    channel_m: int | None = None,
) -> StageSpec:
    blocks = tuple(
        BlockSpec(
            kind="spatial",
            pattern=PATTERNS[pid],
            upscale=upscale,
            out_channels=1,
            m=upscale**2,
            role=role,
            channel_distinct=channel_distinct,
        )
        for pid in pattern_ids
    )
    cb = None
    if channel_m is not None:
        cb = BlockSpec(
            kind="channel", pattern=None, upscale=1, out_channels=3, m=channel_m,
            role=StageRole.CHANNEL,
        )
    return StageSpec(blocks, cb)


_CASCADES = {
    "SR-LUT": ["S"],
    "MuLUT-SDY": ["SDY"],
    "MuLUT-SDY-X2": ["SDY", "SDY"],
    "MuLUT-SDYEHO": ["SDYEHO"],
    "MuLUT-SDYEHO-X2": ["SDYEHO", "SDYEHO"],
    "MuLUT-S-X2": ["S", "S"],
    "MuLUT-S-X3": ["S", "S", "S"],
    "MuLUT-S-X4": ["S", "S", "S", "S"],
}

PRESET_NAMES = tuple(_CASCADES) + (
    "MuLUT-SDYEHO-X2-C",
    "MuLUT-SDY-X2-C",
    "Baseline-A",
    "Baseline-B",
)


def _mosaic_stage(role: StageRole) -> StageSpec:
    block = BlockSpec(
        kind="mosaic", pattern=PATTERNS["S"], upscale=2, out_channels=3, m=12, role=role
    )
    return StageSpec((block,))


def _subplane_stage(role: StageRole) -> StageSpec:
    block = BlockSpec(
        kind="subplane", pattern=PATTERNS["S"], upscale=2, out_channels=1, m=4, role=role
    )
    return StageSpec((block,))


def preset(
    name: str,
    scale: int,
    task: str | None = None,
    color_mode: str | None = None,
    q: int = 4,
) -> PipelineSpec:
    """Build a named pipeline shape (unbound: no tables attached).

    Plain cascade names serve several tasks; scale>1 implies super-resolution
    and scale=1 denoising unless `task` says otherwise (pass task="demosaic"
    for the demosaic variants of SDY-X2, or task="deblock" for r=1 deblocking).
    `color_mode` likewise overrides the default for the inferred task.
    """
    grid = SamplingGrid(q)
    inter, out = StageRole.SPATIAL_INTERMEDIATE, StageRole.SPATIAL_OUTPUT

    if name in ("Baseline-A", "Baseline-B", "MuLUT-SDY-X2-C"):
        if task not in (None, "demosaic"):
            raise PipelineError(f"preset {name} is demosaic-only, got task={task!r}")
        task = "demosaic"
    elif name == "MuLUT-SDYEHO-X2-C":
        task = task or "denoise"
        if task not in ("denoise", "deblock"):
            raise PipelineError(f"preset {name} is a restoration preset, got task={task!r}")
    elif name in _CASCADES:
        if task is None:
            task = "sr" if scale > 1 else "denoise"
    else:
        raise PipelineError(f"unknown preset {name!r}")

    if task == "demosaic":
        if scale != 2:
            raise PipelineError(f"demosaic presets use scale=2, got {scale}")
        if name == "Baseline-A":
            stages = (_subplane_stage(out),)
            mode = "grayscale"
        elif name == "Baseline-B":
            stages = (_mosaic_stage(out),)
            mode = "grayscale"
        elif name == "MuLUT-SDY-X2":
            stages = (_mosaic_stage(inter), _spatial_stage("SDY", 1, out))
            mode = "per-channel"
        elif name == "MuLUT-SDY-X2-C":
            stage2 = _spatial_stage("SDY", 1, out, channel_distinct=True, channel_m=1)
            stages = (_mosaic_stage(inter), stage2)
            mode = "per-channel+channel-LUT"
        else:
            raise PipelineError(f"preset {name} has no demosaic variant")
        if color_mode not in (None, mode):
            raise PipelineError(f"demosaic preset {name} fixes color_mode={mode}")
        return PipelineSpec(task, scale, mode, grid, stages, name=name)

    if task == "sr":
        if scale not in (2, 3, 4):
            raise PipelineError(f"SR presets use scale in (2, 3, 4), got {scale}")
    elif task in ("denoise", "deblock"):
        if scale != 1:
            raise PipelineError(f"{task} presets use scale=1, got {scale}")
    else:
        raise PipelineError(f"presets cannot target task {task!r}")

    if name == "MuLUT-SDYEHO-X2-C":
        mode = color_mode or "per-channel+channel-LUT"
        if mode != "per-channel+channel-LUT":
            raise PipelineError(f"preset {name} requires the channel-LUT color mode")
        # Channel block between the two cascaded stages.
        stage1 = _spatial_stage("SDYEHO", 1, inter, channel_distinct=True, channel_m=3)
        stage2 = _spatial_stage("SDYEHO", 1, out, channel_distinct=True)
        return PipelineSpec(task, scale, mode, grid, (stage1, stage2), name=name)

    mode = color_mode or "grayscale"
    if mode == "per-channel+channel-LUT":
        raise PipelineError(f"preset {name} has no channel blocks; use a -C preset")
    distinct = False
    pattern_stages = _CASCADES[name]
    stages = tuple(
        _spatial_stage(
            pids,
            scale if i == len(pattern_stages) - 1 else 1,
            out if i == len(pattern_stages) - 1 else inter,
            channel_distinct=distinct,
        )
        for i, pids in enumerate(pattern_stages)
    )
    return PipelineSpec(task, scale, mode, grid, stages, name=name)


# -- demosaic frontend -------------------------------------------------------


def demosaic_frontend(img: ImagePlane, phase: str = "RGGB") -> np.ndarray:
    """Stage-1 input arrangement for a Bayer mosaic.

    Gathers the 2x2 Bayer cells at stride 2 into a (4, h/2, w/2) stack in
    pattern-S offset order, so index 0 is the R site at phase (0, 0), then
    G, G, B. Requires even dimensions and RGGB phase.
    """
    if phase != "RGGB":
        raise PipelineError(f"only RGGB phase is supported, got {phase!r}")
    if img.channels != 1:
        raise PipelineError("demosaic input must be a single-channel mosaic")
    if img.height % 2 or img.width % 2:
        raise PipelineError(f"mosaic dimensions must be even, got {img.height}x{img.width}")
    plane = img.plane(0)
    return np.stack(
        [plane[dy::2, dx::2] for dy, dx in PATTERNS["S"].offsets]
    )


# -- configuration documents --------------------------------------------------


def serialize_config(spec: PipelineSpec, lut_paths: list[str] | None = None) -> str:
    """Render a spec as a configuration document.

    lut_paths supplies one path per lut_slots() entry; required unless the
    caller only wants a structural document for a bound-elsewhere spec.
    """
    slots = spec.lut_slots()
    if lut_paths is None:
        lut_paths = [f"lut_{si}_{bi}_{v}.mlut" for si, bi, v in slots]
    if len(lut_paths) != len(slots):
        raise PipelineError(f"got {len(lut_paths)} paths for {len(slots)} slots")
    by_slot = dict(zip(slots, lut_paths))

    lines = [
        f"task = {spec.task}",
        f"scale = {spec.scale}",
        f"color_mode = {spec.color_mode}",
    ]
    for si, stage in enumerate(spec.stages):
        if stage.blocks:
            lines.append("")
            lines.append("[stage]")
            lines.append("blocks = " + " ".join(b.pattern.id for b in stage.blocks))
            lines.append(f"upscale = {stage.upscale}")
            paths = []
            for bi, b in enumerate(stage.blocks):
                for v in range(3 if b.channel_distinct else 1):
                    paths.append(by_slot[(si, bi, v)])
            lines.append("luts = " + " ".join(paths))
        if stage.channel_block is not None:
            lines.append("")
            lines.append("[stage]")
            lines.append("blocks = channel")
            lines.append("upscale = 1")
            lines.append(f"luts = {by_slot[(si, -1, 0)]}")
    return "\n".join(lines) + "\n"


def slot_filenames(spec: PipelineSpec) -> list[str]:
    """Conventional LUT file name per lut_slots() entry (s1_S.mlut, ...)."""
    blocks = {(si, bi): b for si, bi, b in spec.iter_blocks()}
    names = []
    for si, bi, v in spec.lut_slots():
        b = blocks[(si, bi)]
        tag = "channel" if b.kind == "channel" else b.pattern.id
        names.append(f"s{si + 1}_{tag}{f'_c{v}' if b.channel_distinct else ''}.mlut")
    return names


def write_config(
    spec: PipelineSpec, directory: str, config_name: str = "pipeline.cfg"
) -> str:
    """Write a bound spec's tables plus its config document into a directory."""
    from .lutio import write_lut_file

    if not spec.bound:
        raise PipelineError("write_config requires a bound spec")
    os.makedirs(directory, exist_ok=True)
    slots = spec.lut_slots()
    paths = []
    blocks = {(si, bi): b for si, bi, b in spec.iter_blocks()}
    for (si, bi, v), fname in zip(slots, slot_filenames(spec)):
        b = blocks[(si, bi)]
        write_lut_file(
            os.path.join(directory, fname),
            b.luts[v],
            b.role,
            pattern=b.pattern,
            upscale=b.upscale,
        )
        paths.append(fname)
    text = serialize_config(spec, paths)
    cfg_path = os.path.join(directory, config_name)
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return cfg_path


def _parse_sections(text: str, path: str):
    """Split the document into a header mapping and [stage] section mappings."""
    header: dict[str, tuple[str, int]] = {}
    sections: list[dict[str, tuple[str, int]]] = []
    current = header
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[stage]":
            current = {}
            sections.append(current)
            continue
        if line.startswith("["):
            raise ConfigError(f"unknown section {line!r}", path, lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", path, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current:
            raise ConfigError(f"duplicate key {key!r}", path, lineno, key)
        current[key] = (value, lineno)
    return header, sections


_HEADER_KEYS = {"task", "scale", "color_mode"}
_STAGE_KEYS = {"blocks", "luts", "upscale"}


def parse_config(
    text: str,
    base_dir: str = ".",
    path: str = "<config>",
    read_record: Callable[[str], LutRecord] | None = None,
) -> PipelineSpec:
    """Parse and fully validate a configuration document, binding its tables.

    LUT paths resolve relative to base_dir. Every header field of every
    referenced file must match the block it feeds; violations name the field.
    """
    reader = read_record or read_lut_file
    header, sections = _parse_sections(text, path)

    for key in _HEADER_KEYS:
        if key not in header:
            raise ConfigError(f"missing key {key!r}", path, 0, key)
    for key, (_, lineno) in header.items():
        if key not in _HEADER_KEYS:
            raise ConfigError(f"unknown key {key!r}", path, lineno, key)

    task, task_line = header["task"]
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {task!r}", path, task_line, "task")
    scale_text, scale_line = header["scale"]
    try:
        scale = int(scale_text)
    except ValueError:
        raise ConfigError(f"scale must be an integer, got {scale_text!r}", path, scale_line, "scale") from None
    color_mode, mode_line = header["color_mode"]
    if color_mode not in COLOR_MODES:
        raise ConfigError(
            f"color_mode must be one of {', '.join(COLOR_MODES)}; got {color_mode!r}",
            path, mode_line, "color_mode",
        )
    if not sections:
        raise ConfigError("document defines no [stage] sections", path, 0, "stage")

    grid: SamplingGrid | None = None
    stages: list[StageSpec] = []

    # The last section whose blocks are spatial hosts the output-role LUTs;
    # trailing channel sections do not displace it.
    spatial_secs = [
        i for i, sec in enumerate(sections)
        if sec.get("blocks", ("", 0))[0].split() != ["channel"]
    ]
    last_spatial_sec = spatial_secs[-1] if spatial_secs else -1

    def load_record(rel: str, lineno: int) -> LutRecord:
        full = rel if os.path.isabs(rel) else os.path.join(base_dir, rel)
        try:
            return reader(full)
        except FileNotFoundError:
            raise ConfigError(f"LUT file not found: {rel}", path, lineno, "luts") from None
        except ValueError as exc:
            raise ConfigError(f"LUT file {rel}: {exc}", path, lineno, "luts") from None

    def check(cond: bool, msg: str, lineno: int, fieldname: str) -> None:
        if not cond:
            raise ConfigError(msg, path, lineno, fieldname)

    for sec_i, sec in enumerate(sections):
        for key, (_, lineno) in sec.items():
            if key not in _STAGE_KEYS:
                raise ConfigError(f"unknown key {key!r}", path, lineno, key)
        if "blocks" not in sec:
            raise ConfigError("stage missing 'blocks'", path, 0, "blocks")
        if "luts" not in sec:
            raise ConfigError("stage missing 'luts'", path, 0, "luts")
        blocks_text, blocks_line = sec["blocks"]
        luts_text, luts_line = sec["luts"]
        upscale_text, upscale_line = sec.get("upscale", ("1", blocks_line))
        try:
            upscale = int(upscale_text)
        except ValueError:
            raise ConfigError(f"upscale must be an integer, got {upscale_text!r}", path, upscale_line, "upscale") from None
        check(upscale >= 1, f"upscale must be >= 1, got {upscale}", upscale_line, "upscale")

        tokens = blocks_text.split()
        check(bool(tokens), "blocks list is empty", blocks_line, "blocks")
        lut_rel = luts_text.split()

        if tokens == ["channel"]:
            check(upscale == 1, "channel stages do not upscale", upscale_line, "upscale")
            check(len(lut_rel) == 1, f"channel stage lists {len(lut_rel)} LUTs, expected 1", luts_line, "luts")
            rec = load_record(lut_rel[0], luts_line)
            check(rec.role == StageRole.CHANNEL, f"LUT role is {rec.role.name}, expected CHANNEL", luts_line, "role")
            check(rec.table.n == 3, f"channel LUT must be 3D, file has n={rec.table.n}", luts_line, "n")
            check(rec.table.m in (1, 3), f"channel LUT m={rec.table.m} not in (1, 3)", luts_line, "m")
            if grid is None:
                grid = rec.table.grid
            check(rec.table.grid == grid, f"LUT q={rec.table.grid.q} differs from pipeline q={grid.q}", luts_line, "q")
            block = BlockSpec(
                kind="channel", pattern=None, upscale=1, out_channels=3,
                m=rec.table.m, role=StageRole.CHANNEL, luts=(rec.table,),
            )
            if not stages:
                stages.append(StageSpec((), block))
            else:
                check(stages[-1].channel_block is None,
                      "two consecutive channel stages", blocks_line, "blocks")
                stages[-1] = StageSpec(stages[-1].blocks, block)
            continue

        check("channel" not in tokens, "channel cannot mix with spatial patterns", blocks_line, "blocks")
        is_first = not stages
        distinct = color_mode == "per-channel+channel-LUT" and not (task == "demosaic" and is_first)
        per_block = 3 if distinct else 1
        check(
            len(lut_rel) == per_block * len(tokens),
            f"stage lists {len(lut_rel)} LUTs for {len(tokens)} blocks "
            f"({per_block} per block expected)",
            luts_line, "luts",
        )

        built = []
        for ti, token in enumerate(tokens):
            recs = [load_record(lut_rel[ti * per_block + v], luts_line) for v in range(per_block)]
            rec0 = recs[0]
            for rec in recs:
                check(rec.pattern is not None, "spatial LUT missing pattern header", luts_line, "pattern")
                check(rec.pattern.id == token, f"LUT pattern id {rec.pattern.id!r} != block {token!r}", luts_line, "pattern")
                check(rec.table.n == 4, f"spatial LUT must be 4D, file has n={rec.table.n}", luts_line, "n")
                check(rec.upscale == upscale, f"LUT upscale {rec.upscale} != stage upscale {upscale}", luts_line, "upscale")
                check(rec.table.m == rec0.table.m, "channel-variant LUTs disagree on m", luts_line, "m")
                check(rec.pattern == rec0.pattern, "channel-variant LUTs disagree on pattern", luts_line, "pattern")
                if grid is None:
                    grid = rec.table.grid
                check(rec.table.grid == grid, f"LUT q={rec.table.grid.q} differs from pipeline q={grid.q}", luts_line, "q")

            if task == "demosaic" and is_first:
                check(token == "S", "demosaic stage 1 uses the S cell pattern", blocks_line, "blocks")
                check(upscale == 2, "demosaic stage 1 upscales by 2", upscale_line, "upscale")
                if rec0.table.m == 12:
                    kind, c_out = "mosaic", 3
                elif rec0.table.m == 4:
                    kind, c_out = "subplane", 1
                else:
                    raise ConfigError(
                        f"demosaic stage-1 LUT m={rec0.table.m}, expected 12 (mosaic) or 4 (subplane)",
                        path, luts_line, "m",
                    )
            else:
                kind, c_out = "spatial", 1
                check(
                    rec0.table.m == upscale**2 * c_out,
                    f"LUT m={rec0.table.m} != upscale**2 = {upscale ** 2}",
                    luts_line, "m",
                )
            expected_role = StageRole.SPATIAL_OUTPUT if sec_i == last_spatial_sec else StageRole.SPATIAL_INTERMEDIATE
            for rec in recs:
                check(
                    rec.role == expected_role,
                    f"LUT role is {rec.role.name}, expected {expected_role.name}",
                    luts_line, "role",
                )
            built.append(
                BlockSpec(
                    kind=kind, pattern=rec0.pattern, upscale=upscale, out_channels=c_out,
                    m=rec0.table.m, role=expected_role, channel_distinct=distinct,
                    luts=tuple(r.table for r in recs),
                )
            )
        try:
            stages.append(StageSpec(tuple(built)))
        except PipelineError as exc:
            raise ConfigError(str(exc), path, blocks_line, "blocks") from None

    assert grid is not None
    try:
        return PipelineSpec(task, scale, color_mode, grid, tuple(stages), name="custom")
    except PipelineError as exc:
        raise ConfigError(str(exc), path, 0, "") from None


def parse_config_file(cfg_path: str) -> PipelineSpec:
    with open(cfg_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(cfg_path) or ".", path=cfg_path)
