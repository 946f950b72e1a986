"""MULUT1 binary container: one sampled LUT per file.

Layout (little-endian, 64-byte header + payload):

    offset  size  field
    0       6     magic "MULUT1"
    6       1     format version (1)
    7       1     role: 0 spatial-intermediate, 1 spatial-output, 2 channel
    8       1     sampling exponent q
    9       1     index dimensionality n (4 spatial, 3 channel)
    10      2     values per entry m, uint16
    12      1     upscale factor r (1 for channel and non-upscaling tables)
    13      1     pattern id, ASCII (0 for channel tables)
    14      16    four offsets as (int8 dy, int8 dx) pairs (zero for channel)
    30      34    reserved, zero
    64      ...   payload: (2**(8-q)+1)**n * m uint8 values, row-major,
                  value channels innermost

The file is self-describing: a reader reconstructs the sampling grid and
pattern from the header alone.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .core import LutTable, Pattern, SamplingGrid, lut_size_bytes

MAGIC = b"MULUT1"
VERSION = 1
HEADER_BYTES = 64


class StageRole(enum.IntEnum):
    SPATIAL_INTERMEDIATE = 0
    SPATIAL_OUTPUT = 1
    CHANNEL = 2


class LutFormatError(ValueError):
    """Container violates the MULUT1 format. `code` names the failure class."""

    code = "format"


class BadMagicError(LutFormatError):
    code = "bad-magic"


class UnsupportedVersionError(LutFormatError):
    code = "unsupported-version"


class LengthMismatchError(LutFormatError):
    code = "length-mismatch"


class InvariantError(LutFormatError):
    code = "invariant"


@dataclass(frozen=True)
class LutRecord:
    """A decoded MULUT1 file: the table plus its header metadata."""

    table: LutTable
    role: StageRole
    pattern: Pattern | None
    upscale: int


def write_lut(
    table: LutTable,
    role: StageRole,
    pattern: Pattern | None = None,
    upscale: int = 1,
) -> bytes:
    """Serialize a table to MULUT1 bytes.

    Spatial roles require a pattern and n=4; the channel role requires no
    pattern, n=3, and upscale 1. For spatial tables m must be divisible by
    upscale**2 (m = upscale**2 * output_channels).
    """
    role = StageRole(role)
    if role is StageRole.CHANNEL:
        if pattern is not None:
            raise InvariantError("channel tables carry no spatial pattern")
        if table.n != 3:
            raise InvariantError(f"channel tables are 3D, got n={table.n}")
        if upscale != 1:
            raise InvariantError("channel tables do not upscale")
    else:
        if pattern is None:
            raise InvariantError("spatial tables require a pattern")
        if table.n != 4:
            raise InvariantError(f"spatial tables are 4D, got n={table.n}")
        if upscale < 1 or upscale > 255:
            raise InvariantError(f"upscale {upscale} outside [1, 255]")
        if table.m % (upscale * upscale) != 0:
            raise InvariantError(
                f"m={table.m} not divisible by upscale**2={upscale * upscale}"
            )

    header = bytearray(HEADER_BYTES)
    header[0:6] = MAGIC
    header[6] = VERSION
    header[7] = int(role)
    header[8] = table.grid.q
    header[9] = table.n
    struct.pack_into("<H", header, 10, table.m)
    header[12] = upscale
    if pattern is not None:
        header[13] = ord(pattern.id)
        for i, (dy, dx) in enumerate(pattern.offsets):
            struct.pack_into("<bb", header, 14 + 2 * i, dy, dx)
    return bytes(header) + table.values.tobytes()


def read_lut(data: bytes) -> LutRecord:
    """Decode MULUT1 bytes, validating magic, version, lengths, invariants."""
    if len(data) < HEADER_BYTES:
        raise LengthMismatchError(
            f"file has {len(data)} bytes, shorter than the {HEADER_BYTES}-byte header"
        )
    if data[0:6] != MAGIC:
        raise BadMagicError(f"bad magic {data[0:6]!r}, expected {MAGIC!r}")
    if data[6] != VERSION:
        raise UnsupportedVersionError(f"unsupported version {data[6]}, expected {VERSION}")

    try:
        role = StageRole(data[7])
    except ValueError:
        raise InvariantError(f"unknown role byte {data[7]}") from None
    q, n = data[8], data[9]
    (m,) = struct.unpack_from("<H", data, 10)
    upscale = data[12]

    if not 0 <= q <= 8:
        raise InvariantError(f"sampling exponent q={q} outside [0, 8]")
    if n not in (3, 4):
        raise InvariantError(f"index dimensionality n={n} not in (3, 4)")
    if m < 1:
        raise InvariantError("m must be >= 1")

    payload = lut_size_bytes(q, n, m)
    if len(data) != HEADER_BYTES + payload:
        raise LengthMismatchError(
            f"file has {len(data)} bytes, expected {HEADER_BYTES} + {payload}"
        )
    if any(data[30:HEADER_BYTES]):
        raise InvariantError("reserved header bytes must be zero")

    pattern: Pattern | None = None
    if role is StageRole.CHANNEL:
        if n != 3:
            raise InvariantError(f"channel tables are 3D, got n={n}")
        if data[13] != 0 or any(data[14:30]):
            raise InvariantError("channel tables must have zero pattern fields")
        if upscale != 1:
            raise InvariantError("channel tables do not upscale")
    else:
        if n != 4:
            raise InvariantError(f"spatial tables are 4D, got n={n}")
        if upscale < 1:
            raise InvariantError("upscale byte must be >= 1")
        if m % (upscale * upscale) != 0:
            raise InvariantError(
                f"m={m} not divisible by upscale**2={upscale * upscale}"
            )
        pid = data[13:14].decode("ascii", errors="replace")
        offsets = tuple(
            struct.unpack_from("<bb", data, 14 + 2 * i) for i in range(4)
        )
        try:
            pattern = Pattern(pid, offsets)
        except ValueError as exc:
            raise InvariantError(f"bad pattern in header: {exc}") from None

    table = LutTable(
        n=n,
        m=m,
        grid=SamplingGrid(q),
        values=np.frombuffer(data, dtype=np.uint8, count=payload, offset=HEADER_BYTES),
    )
    return LutRecord(table=table, role=role, pattern=pattern, upscale=upscale)


def read_lut_file(path: str) -> LutRecord:
    with open(path, "rb") as fh:
        return read_lut(fh.read())


def write_lut_file(
    path: str,
    table: LutTable,
    role: StageRole,
    pattern: Pattern | None = None,
    upscale: int = 1,
) -> None:
    blob = write_lut(table, role, pattern=pattern, upscale=upscale)
    with open(path, "wb") as fh:
        fh.write(blob)
