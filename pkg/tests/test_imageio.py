"""Netpbm encode/decode, golden bytes, PNG dispatch."""

import numpy as np
import pytest

from mulut.core import ImagePlane
from mulut.imageio import (
    ImageFormatError,
    decode_pnm,
    encode_pnm,
    read_image,
    write_image,
)


def _gray(seed=0, h=5, w=7):
    rng = np.random.default_rng(seed)
    return ImagePlane(rng.integers(0, 256, (h, w), dtype=np.uint8))


def _rgb(seed=0, h=5, w=7):
    rng = np.random.default_rng(seed)
    return ImagePlane(rng.integers(0, 256, (3, h, w), dtype=np.uint8))


class TestGolden:
    def test_pgm_bytes(self):
        img = ImagePlane(np.array([[0, 128], [255, 7]], np.uint8))
        assert encode_pnm(img) == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])

    def test_ppm_interleaves_channels(self):
        arr = np.zeros((3, 1, 2), np.uint8)
        arr[0, 0] = (10, 40)
        arr[1, 0] = (20, 50)
        arr[2, 0] = (30, 60)
        blob = encode_pnm(ImagePlane(arr))
        assert blob == b"P6\n2 1\n255\n" + bytes([10, 20, 30, 40, 50, 60])

    def test_decode_hand_written(self):
        img = decode_pnm(b"P5 2 2 255 " + bytes([1, 2, 3, 4]))
        assert np.array_equal(img.data[0], [[1, 2], [3, 4]])

    def test_decode_with_comments(self):
        blob = b"P5\n# a comment\n2 1\n# another\n255\n" + bytes([9, 8])
        img = decode_pnm(blob)
        assert np.array_equal(img.data[0], [[9, 8]])

    def test_low_maxval_bytes_kept_raw(self):
        img = decode_pnm(b"P5 2 1 15 " + bytes([3, 14]))
        assert list(img.data[0, 0]) == [3, 14]


class TestRoundTrip:
    def test_gray(self):
        img = _gray(1)
        assert decode_pnm(encode_pnm(img)) == img

    def test_rgb(self):
        img = _rgb(2)
        assert decode_pnm(encode_pnm(img)) == img

    def test_files(self, tmp_path):
        for name, img in (("a.pgm", _gray(3)), ("b.ppm", _rgb(4))):
            p = str(tmp_path / name)
            write_image(p, img)
            assert read_image(p) == img


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P3 1 1 255 0")

    def test_truncated_header(self):
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P5 2 2")

    def test_short_raster(self):
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P5 2 2 255 " + bytes([1, 2, 3]))

    def test_bad_maxval(self):
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P5 1 1 65535 " + bytes([1, 1]))
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P5 1 1 0 " + bytes([1]))

    def test_garbage_in_header(self):
        with pytest.raises(ImageFormatError):
            decode_pnm(b"P5 two 2 255 " + bytes([1, 2]))

    def test_read_error_names_path(self, tmp_path):
        p = tmp_path / "junk.pgm"
        p.write_bytes(b"nonsense")
        with pytest.raises(ImageFormatError) as ei:
            read_image(str(p))
        assert "junk.pgm" in str(ei.value)

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            read_image(str(tmp_path / "absent.pgm"))

    def test_format_error_is_value_error(self):
        assert issubclass(ImageFormatError, ValueError)


class TestPng:
    pil = pytest.importorskip("PIL")

    def test_round_trip(self, tmp_path):
        for img in (_gray(5), _rgb(6)):
            p = str(tmp_path / ("x%d.png" % img.channels))
            write_image(p, img)
            assert read_image(p) == img

    def test_extension_selects_format(self, tmp_path):
        p = str(tmp_path / "y.png")
        write_image(p, _gray(7))
        with open(p, "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"
