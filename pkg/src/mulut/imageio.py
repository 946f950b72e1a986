"""Binary PGM (P5) and PPM (P6) files, plus optional PNG via Pillow.

The netpbm formats are the native fixtures: dependency-free, byte-exact,
and trivially diffable. Maxval is written as 255 and accepted in 1..255
(one byte per sample). PNG paths work only when Pillow is installed
(`pip install mulut[png]`).
"""

from __future__ import annotations

import os

import numpy as np

from .core import ImagePlane


class ImageFormatError(ValueError):
    """File is not a readable image in a supported format."""


def _tokenize_header(data: bytes, count: int) -> tuple[list[int], int]:
    """First `count` whitespace-separated integer tokens after the magic.

    Handles '#' comments, which run to end of line. Returns the tokens and
    the offset one whitespace byte past the last one (start of raster data).
    """
    tokens: list[int] = []
    pos = 2  # past the 2-byte magic
    while len(tokens) < count:
        if pos >= len(data):
            raise ImageFormatError("truncated header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError("unterminated comment in header")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        else:
            raise ImageFormatError(f"unexpected byte {ch!r} in header")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError("missing whitespace after maxval")
    return tokens, pos + 1


def decode_pnm(data: bytes) -> ImagePlane:
    """Parse a binary PGM/PPM byte string."""
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise ImageFormatError(f"not a binary PGM/PPM file (magic {magic!r})")
    (width, height, maxval), offset = _tokenize_header(data, 3)
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise ImageFormatError(f"maxval {maxval} outside 1..255 (one byte per sample)")
    need = width * height * channels
    raster = data[offset : offset + need]
    if len(raster) != need:
        raise ImageFormatError(
            f"raster has {len(raster)} bytes, geometry needs {need}"
        )
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        arr = arr.reshape(1, height, width)
    else:
        arr = arr.reshape(height, width, 3).transpose(2, 0, 1)
    return ImagePlane(np.ascontiguousarray(arr))


def encode_pnm(img: ImagePlane) -> bytes:
    """Render as binary PGM (1 channel) or PPM (3 channels), maxval 255."""
    if img.channels == 1:
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        return header + img.plane(0).tobytes()
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.data.transpose(1, 2, 0)).tobytes()


def _is_png(path: str) -> bool:
    return os.path.splitext(path)[1].lower() == ".png"


def _require_pillow():
    try:
        from PIL import Image
    except ImportError as exc:
        raise ImageFormatError(
            "PNG support needs the Pillow package (pip install mulut[png])"
        ) from exc
    return Image


def read_image(path: str) -> ImagePlane:
    """Load a PGM/PPM (or, with Pillow, PNG) file as an ImagePlane."""
    if _is_png(path):
        image = _require_pillow().open(path)
        if image.mode not in ("L", "RGB"):
            image = image.convert("L" if image.mode == "1" else "RGB")
        arr = np.asarray(image, dtype=np.uint8)
        if arr.ndim == 2:
            return ImagePlane(arr[None].copy())
        return ImagePlane(np.ascontiguousarray(arr.transpose(2, 0, 1)))
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_pnm(data)
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None


def write_image(path: str, img: ImagePlane) -> None:
    """Write an ImagePlane; the format follows the extension (.png vs PNM)."""
    if _is_png(path):
        image_mod = _require_pillow()
        if img.channels == 1:
            image_mod.fromarray(img.plane(0), mode="L").save(path)
        else:
            image_mod.fromarray(
                np.ascontiguousarray(img.data.transpose(1, 2, 0)), mode="RGB"
            ).save(path)
        return
    with open(path, "wb") as fh:
        fh.write(encode_pnm(img))
