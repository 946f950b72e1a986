"""Operation counting and energy estimation for LUT pipelines.

The per-op costs default to published picojoule figures for 45nm-class
hardware (int8 add 0.03 pJ ... float32 mult 3.7 pJ). Counting follows a
fixed, documented convention; for an n-dimensional query against an
m-value-per-record table:

    per query      2n int8 adds (cell shift + fraction mask per dimension),
                   n int32 mults and n-1 int32 adds for the base address,
                   n int32 adds for the weight differences and n more for
                   the vertex steps
    per value      n+1 int32 mults (weight products) and n int32 adds
                   (accumulating the n+1 weighted terms), m values per query
    fusion         (contributions - 1) int32 adds per fused output value;
                   subplane green planes fuse 8 contributions, R/B fuse 4
                   and carry one gain mult each
    requantize     1 int32 mult + 1 int32 add per emitted value
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .pipelines import PipelineSpec

OPS = ("add", "mult")
DTYPES = ("int8", "int32", "float16", "float32")


@dataclass(frozen=True)
class EnergyTable:
    """Picojoules per scalar operation, by dtype."""

    add_int8: float = 0.03
    add_int32: float = 0.1
    add_float16: float = 0.4
    add_float32: float = 0.9
    mult_int8: float = 0.2
    mult_int32: float = 3.1
    mult_float16: float = 1.1
    mult_float32: float = 3.7

    def cost(self, op: str, dtype: str) -> float:
        if op not in OPS or dtype not in DTYPES:
            raise ValueError(f"no cost for ({op}, {dtype})")
        return getattr(self, f"{op}_{dtype}")


DEFAULT_ENERGY = EnergyTable()


@dataclass
class OpCounts:
    """Operation tallies keyed by (op, dtype)."""

    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def bump(self, op: str, dtype: str, amount: int) -> None:
        if amount < 0:
            raise ValueError(f"negative op count {amount}")
        if amount:
            key = (op, dtype)
            self.counts[key] = self.counts.get(key, 0) + amount

    def get(self, op: str, dtype: str) -> int:
        return self.counts.get((op, dtype), 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def __add__(self, other: "OpCounts") -> "OpCounts":
        merged = OpCounts(dict(self.counts))
        for (op, dtype), amount in other.counts.items():
            merged.bump(op, dtype, amount)
        return merged

    def scaled(self, k: int) -> "OpCounts":
        return OpCounts({key: amount * k for key, amount in self.counts.items()})


def _query_cost(n: int, m: int) -> OpCounts:
    c = OpCounts()
    c.bump("add", "int8", 2 * n)
    c.bump("mult", "int32", n + (n + 1) * m)
    c.bump("add", "int32", n + (n - 1) + n + n * m)
    return c


def count_ops(spec: PipelineSpec, width: int, height: int) -> OpCounts:
    """Closed-form operation tallies for one image of the given input size.

    Counts depend only on the pipeline structure, never on payloads, so an
    unbound spec works. Every tally is linear in the pixel count.
    """
    if width < 1 or height < 1:
        raise ValueError(f"bad image size {width}x{height}")
    if spec.task == "demosaic" and (width % 2 or height % 2):
        raise ValueError(f"demosaic input needs even dimensions, got {width}x{height}")
    h, w = height, width
    channels = 1 if (spec.task == "demosaic" or spec.color_mode == "grayscale") else 3

    total = OpCounts()
    for stage in spec.stages:
        if stage.blocks:
            kind = stage.kind
            if kind == "mosaic":
                queries = (h // 2) * (w // 2)
                total += _query_cost(4, 12).scaled(queries)
                total.bump("mult", "int32", 3 * h * w)  # requantize
                total.bump("add", "int32", 3 * h * w)
                channels = 3
            elif kind == "subplane":
                queries = 16 * (h // 2) * (w // 2)  # 4 subplanes x 4 rotations
                total += _query_cost(4, 4).scaled(queries)
                plane = h * w
                total.bump("add", "int32", 3 * plane + 7 * plane + 3 * plane)  # fusion R, G, B
                total.bump("mult", "int32", 2 * plane)  # R and B gains
                total.bump("mult", "int32", 3 * plane)  # requantize
                total.bump("add", "int32", 3 * plane)
                channels = 3
            else:
                branches = len(stage.blocks)
                r = stage.upscale
                queries = channels * branches * 4 * h * w
                total += _query_cost(4, r * r).scaled(queries)
                out_vals = channels * (h * r) * (w * r)
                total.bump("add", "int32", out_vals * (4 * branches - 1))  # fusion
                total.bump("mult", "int32", out_vals)  # requantize
                total.bump("add", "int32", out_vals)
                h, w = h * r, w * r
        if stage.channel_block is not None:
            m = stage.channel_block.m
            queries = (h * w) if m == 3 else 3 * h * w
            total += _query_cost(3, m).scaled(queries)
            total.bump("mult", "int32", 3 * h * w)  # requantize
            total.bump("add", "int32", 3 * h * w)
            channels = 3
    return total


def estimate_energy(counts: OpCounts, table: EnergyTable = DEFAULT_ENERGY) -> float:
    """Total picojoules: the dot product of tallies and per-op costs."""
    return sum(
        amount * table.cost(op, dtype) for (op, dtype), amount in counts.counts.items()
    )


def _rows(counts: OpCounts, table: EnergyTable):
    for op in OPS:
        for dtype in DTYPES:
            amount = counts.get(op, dtype)
            if amount:
                yield op, dtype, amount, amount * table.cost(op, dtype)


def report_csv(counts: OpCounts, table: EnergyTable = DEFAULT_ENERGY) -> str:
    """Machine-readable report: op,dtype,count,energy_pj plus a total row."""
    lines = ["op,dtype,count,energy_pj"]
    for op, dtype, amount, pj in _rows(counts, table):
        lines.append(f"{op},{dtype},{amount},{pj:.6f}")
    lines.append(f"total,,{counts.total()},{estimate_energy(counts, table):.6f}")
    return "\n".join(lines) + "\n"


def report_table(counts: OpCounts, table: EnergyTable = DEFAULT_ENERGY) -> str:
    """Aligned human-readable tally with the energy total."""
    rows = [(op, dtype, f"{amount:,}", f"{pj:,.1f}")
            for op, dtype, amount, pj in _rows(counts, table)]
    rows.append(("total", "", f"{counts.total():,}",
                 f"{estimate_energy(counts, table):,.1f}"))
    headers = ("op", "dtype", "count", "energy (pJ)")
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(4)]
    def fmt(cells):
        left = f"{cells[0]:<{widths[0]}}  {cells[1]:<{widths[1]}}"
        return f"{left}  {cells[2]:>{widths[2]}}  {cells[3]:>{widths[3]}}"
    out = [fmt(headers), fmt(tuple("-" * wd for wd in widths))]
    out.extend(fmt(r) for r in rows)
    return "\n".join(out) + "\n"
