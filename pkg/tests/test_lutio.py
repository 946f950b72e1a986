"""Container round trips, a hand-assembled golden header, error taxonomy."""

import struct

import numpy as np
import pytest

from mulut.core import PATTERNS, LutTable, SamplingGrid
from mulut.lutio import (
    HEADER_BYTES,
    MAGIC,
    VERSION,
    BadMagicError,
    InvariantError,
    LengthMismatchError,
    LutFormatError,
    StageRole,
    UnsupportedVersionError,
    read_lut,
    read_lut_file,
    write_lut,
    write_lut_file,
)


def _table(n=4, q=6, m=4, seed=0):
    rng = np.random.default_rng(seed)
    levels = SamplingGrid(q).levels
    vals = rng.integers(0, 256, levels**n * m, dtype=np.uint8)
    return LutTable(n=n, m=m, grid=SamplingGrid(q), values=vals)


def _golden_header(role, q, n, m, upscale, pattern):
    """Assemble the 64-byte header by hand, field by field."""
    h = bytearray(HEADER_BYTES)
    h[0:6] = b"MULUT1"
    h[6] = 1
    h[7] = role
    h[8] = q
    h[9] = n
    struct.pack_into("<H", h, 10, m)
    h[12] = upscale
    if pattern is not None:
        h[13] = ord(pattern.id)
        for i, (dy, dx) in enumerate(pattern.offsets):
            struct.pack_into("<bb", h, 14 + 2 * i, dy, dx)
    return bytes(h)


class TestGolden:
    def test_header_bytes_exactly(self):
        t = _table(n=4, q=6, m=4, seed=1)
        blob = write_lut(t, StageRole.SPATIAL_OUTPUT, PATTERNS["D"], upscale=2)
        expect = _golden_header(1, 6, 4, 4, 2, PATTERNS["D"])
        assert blob[:HEADER_BYTES] == expect
        assert blob[HEADER_BYTES:] == t.values.tobytes()
        assert len(blob) == HEADER_BYTES + 5**4 * 4

    def test_channel_header(self):
        t = _table(n=3, q=4, m=3, seed=2)
        blob = write_lut(t, StageRole.CHANNEL)
        assert blob[:HEADER_BYTES] == _golden_header(2, 4, 3, 3, 1, None)

    def test_reader_accepts_hand_built_file(self):
        payload = bytes(range(256)) * (5**4 * 4 // 256) + bytes(5**4 * 4 % 256)
        blob = _golden_header(0, 6, 4, 4, 2, PATTERNS["Y"]) + payload
        rec = read_lut(blob)
        assert rec.role is StageRole.SPATIAL_INTERMEDIATE
        assert rec.pattern == PATTERNS["Y"]
        assert rec.upscale == 2
        assert rec.table.values.tobytes() == payload


class TestRoundTrip:
    @pytest.mark.parametrize(
        "role,pattern,upscale,n,m",
        [
            (StageRole.SPATIAL_INTERMEDIATE, PATTERNS["S"], 1, 4, 1),
            (StageRole.SPATIAL_OUTPUT, PATTERNS["E"], 4, 4, 16),
            (StageRole.SPATIAL_OUTPUT, PATTERNS["H"], 2, 4, 12),
            (StageRole.CHANNEL, None, 1, 3, 3),
            (StageRole.CHANNEL, None, 1, 3, 1),
        ],
    )
    def test_fields_survive(self, role, pattern, upscale, n, m):
        t = _table(n=n, q=4 if n == 3 else 6, m=m, seed=m)
        rec = read_lut(write_lut(t, role, pattern, upscale))
        assert rec.role is role
        assert rec.pattern == pattern
        assert rec.upscale == upscale
        assert rec.table == t

    def test_file_round_trip(self, tmp_path):
        t = _table(seed=9)
        p = str(tmp_path / "x.mlut")
        write_lut_file(p, t, StageRole.SPATIAL_OUTPUT, PATTERNS["S"], upscale=2)
        rec = read_lut_file(p)
        assert rec.table == t
        assert rec.upscale == 2


class TestWriteValidation:
    def test_channel_rules(self):
        t3 = _table(n=3, q=4, m=3)
        with pytest.raises(InvariantError):
            write_lut(t3, StageRole.CHANNEL, PATTERNS["S"])
        with pytest.raises(InvariantError):
            write_lut(t3, StageRole.CHANNEL, upscale=2)
        with pytest.raises(InvariantError):
            write_lut(_table(n=4, q=6, m=3), StageRole.CHANNEL)

    def test_spatial_rules(self):
        t4 = _table(n=4, q=6, m=4)
        with pytest.raises(InvariantError):
            write_lut(t4, StageRole.SPATIAL_OUTPUT)  # no pattern
        with pytest.raises(InvariantError):
            write_lut(t4, StageRole.SPATIAL_OUTPUT, PATTERNS["S"], upscale=3)  # 4 % 9
        with pytest.raises(InvariantError):
            write_lut(_table(n=3, q=4, m=4), StageRole.SPATIAL_OUTPUT, PATTERNS["S"])


class TestReadValidation:
    def _blob(self, overrides=()):
        t = _table(n=4, q=6, m=4, seed=4)
        blob = bytearray(write_lut(t, StageRole.SPATIAL_OUTPUT, PATTERNS["S"], 2))
        for pos, val in overrides:
            blob[pos] = val
        return bytes(blob)

    def test_error_classes_and_codes(self):
        cases = [
            (self._blob()[:40], LengthMismatchError, "length-mismatch"),
            (self._blob()[:-1], LengthMismatchError, "length-mismatch"),
            (b"NOTLUT" + self._blob()[6:], BadMagicError, "bad-magic"),
            (self._blob([(6, 2)]), UnsupportedVersionError, "unsupported-version"),
            (self._blob([(7, 9)]), InvariantError, "invariant"),
            (self._blob([(8, 9)]), InvariantError, "invariant"),
            (self._blob([(9, 5)]), InvariantError, "invariant"),
            (self._blob([(31, 1)]), InvariantError, "invariant"),
        ]
        for blob, exc, code in cases:
            with pytest.raises(exc) as ei:
                read_lut(blob)
            assert ei.value.code == code
            assert isinstance(ei.value, LutFormatError)
            assert isinstance(ei.value, ValueError)

    def test_channel_with_pattern_bytes_rejected(self):
        t = _table(n=3, q=4, m=3)
        blob = bytearray(write_lut(t, StageRole.CHANNEL))
        blob[13] = ord("S")
        with pytest.raises(InvariantError):
            read_lut(bytes(blob))

    def test_m_upscale_consistency_enforced(self):
        # upscale 2 demands m divisible by 4
        t = _table(n=4, q=6, m=4)
        blob = bytearray(write_lut(t, StageRole.SPATIAL_OUTPUT, PATTERNS["S"], 2))
        blob[12] = 3
        with pytest.raises(InvariantError):
            read_lut(bytes(blob))

    def test_truncated_to_empty(self):
        with pytest.raises(LengthMismatchError):
            read_lut(b"")
