"""Core types for sampled look-up-table networks.

A LUT network replaces a small convolutional network with tables indexed by
uint8 pixel tuples. Tables are sampled on a uniform grid (every 2**q levels
plus both endpoints) to keep storage practical, and queried with simplex
interpolation between grid points. The types here carry the geometry:
the sampling grid, the spatial patterns that pick which input pixels form
an index tuple, the table payload itself, and a planar uint8 image wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

# Widest unsigned integer a table size is allowed to occupy.
_SIZE_LIMIT = 2**64 - 1


class RangeError(ValueError):
    """A size computation left the representable range."""


def lut_size_bytes(q: int, n: int, m: int) -> int:
    """Storage in bytes for a sampled LUT: (2**(8-q) + 1)**n * m.

    q is the sampling exponent (interval 2**q), n the index dimensionality,
    m the number of output values per entry. Raises RangeError if the result
    exceeds the widest unsigned integer (2**64 - 1) or if any argument is
    outside its domain.
    """
    if not 0 <= q <= 8:
        raise RangeError(f"sampling exponent q={q} outside [0, 8]")
    if n < 1:
        raise RangeError(f"index dimensionality n={n} must be >= 1")
    if m < 1:
        raise RangeError(f"values per entry m={m} must be >= 1")
    size = (2 ** (8 - q) + 1) ** n * m
    if size > _SIZE_LIMIT:
        raise RangeError(f"LUT size {size} exceeds 2**64 - 1")
    return size


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform uint8 sampling grid with interval 2**q.

    Grid levels are 0, 2**q, 2*2**q, ..., 256, clamped to 255 on use, giving
    2**(8-q) + 1 levels per dimension. q=0 is the dense (no sampling) case.
    """

    q: int

    def __post_init__(self) -> None:
        if not 0 <= self.q <= 8:
            raise ValueError(f"sampling exponent q={self.q} outside [0, 8]")

    @property
    def interval(self) -> int:
        return 1 << self.q

    @property
    def levels(self) -> int:
        return (1 << (8 - self.q)) + 1

    def level_values(self) -> np.ndarray:
        """Nominal grid coordinates, 0..256 step 2**q (last one exceeds uint8)."""
        return np.arange(self.levels, dtype=np.int64) << self.q


@dataclass(frozen=True)
class Pattern:
    """Spatial sampling pattern: four (dy, dx) offsets, anchor first.

    Offsets are non-negative and anchored at (0, 0); the engine reaches the
    other three directions through the rotation ensemble rather than through
    mirrored offsets.
    """

    id: str
    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.id) != 1 or not self.id.isalpha():
            raise ValueError(f"pattern id must be a single letter, got {self.id!r}")
        if len(self.offsets) != 4:
            raise ValueError(f"pattern {self.id}: need 4 offsets, got {len(self.offsets)}")
        if self.offsets[0] != (0, 0):
            raise ValueError(f"pattern {self.id}: first offset must be the (0, 0) anchor")
        if len(set(self.offsets)) != 4:
            raise ValueError(f"pattern {self.id}: offsets must be distinct")
        for dy, dx in self.offsets:
            if dy < 0 or dx < 0:
                raise ValueError(f"pattern {self.id}: offsets must be non-negative")
            if not (-128 <= dy <= 127 and -128 <= dx <= 127):
                raise ValueError(f"pattern {self.id}: offset ({dy}, {dx}) outside int8")

    @property
    def extent(self) -> tuple[int, int]:
        """Bounding window (height, width) covered by the offsets."""
        return (
            max(dy for dy, _ in self.offsets) + 1,
            max(dx for _, dx in self.offsets) + 1,
        )

    @property
    def reach(self) -> int:
        """Largest offset component; the pattern's one-sided spatial radius."""
        return max(max(dy, dx) for dy, dx in self.offsets)

    def rotated(self, k: int) -> tuple[tuple[int, int], ...]:
        """Offsets after k quarter-turns about the anchor (counterclockwise).

        Used to reason about the ensemble's effective footprint; rotated
        offsets may be negative.
        """
        offs = self.offsets
        for _ in range(k % 4):
            offs = tuple((-dx, dy) for dy, dx in offs)
        return offs


def _p(pid: str, *offs: tuple[int, int]) -> Pattern:
    return Pattern(pid, tuple(offs))


# Built-in patterns. S is the 2x2 corner; D and Y extend the footprint to
# 5x5 (D is S dilated by 2, Y picks diagonal-adjacent pixels); E, H, O
# extend it to 7x7 (E is S dilated by 3).
PATTERNS: dict[str, Pattern] = {
    "S": _p("S", (0, 0), (0, 1), (1, 0), (1, 1)),
    "D": _p("D", (0, 0), (0, 2), (2, 0), (2, 2)),
    "Y": _p("Y", (0, 0), (1, 1), (1, 2), (2, 1)),
    "E": _p("E", (0, 0), (0, 3), (3, 0), (3, 3)),
    "H": _p("H", (0, 0), (2, 2), (2, 3), (3, 2)),
    "O": _p("O", (0, 0), (1, 3), (3, 1), (3, 3)),
}


@dataclass(frozen=True, eq=False)
class LutTable:
    """Sampled LUT payload: levels**n entries of m uint8 values each.

    values is flat, row-major over the n index dimensions with the m value
    channels innermost. n=4 tables index spatial pixel tuples, n=3 tables
    index (R, G, B).
    """

    n: int
    m: int
    grid: SamplingGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n not in (3, 4):
            raise ValueError(f"index dimensionality n={self.n} not in (3, 4)")
        if self.m < 1:
            raise ValueError(f"values per entry m={self.m} must be >= 1")
        arr = np.ascontiguousarray(self.values, dtype=np.uint8)
        expected = lut_size_bytes(self.grid.q, self.n, self.m)
        if arr.size != expected:
            raise ValueError(
                f"payload has {arr.size} bytes, expected {expected} "
                f"(q={self.grid.q}, n={self.n}, m={self.m})"
            )
        arr = arr.reshape(expected)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def size_bytes(self) -> int:
        return self.values.size

    def entry(self, index: Iterable[int]) -> np.ndarray:
        """The m values stored at a grid index (per-dimension level numbers)."""
        idx = tuple(index)
        if len(idx) != self.n:
            raise ValueError(f"index has {len(idx)} dims, table has {self.n}")
        flat = 0
        for i in idx:
            if not 0 <= i < self.grid.levels:
                raise IndexError(f"level index {i} outside [0, {self.grid.levels})")
            flat = flat * self.grid.levels + i
        return self.values[flat * self.m : (flat + 1) * self.m]

    def reshaped(self) -> np.ndarray:
        """Read-only view shaped (levels,)*n + (m,)."""
        return self.values.reshape((self.grid.levels,) * self.n + (self.m,))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LutTable):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:  # frozen dataclass with eq=False would supply id-hash
        return hash((self.n, self.m, self.grid, self.values.tobytes()))


class ImagePlane:
    """Planar uint8 image, shape (channels, height, width), channels 1 or 3.

    Thin immutable wrapper so pipeline code can pass one type for gray and
    RGB without re-checking layout everywhere.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray) -> None:
        arr = np.asarray(data)
        if arr.dtype != np.uint8:
            raise ValueError(f"image dtype must be uint8, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise ValueError(f"image shape must be (1|3, h, w), got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"image must be non-empty, got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.data = arr

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def plane(self, c: int) -> np.ndarray:
        return self.data[c]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImagePlane):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"ImagePlane(channels={self.channels}, height={self.height}, width={self.width})"
