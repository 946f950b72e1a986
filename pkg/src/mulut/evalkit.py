"""Quality metrics and degradation generators for the evaluation loops.

Metric conventions are fixed here so results are comparable across runs:
PSNR on 8-bit data (peak 255), cPSNR as the mean of the three per-channel
PSNRs, luma via the BT.601 studio-swing transform, SSIM with the usual
11x11 Gaussian window (sigma 1.5, K1=0.01, K2=0.03, L=255), and PSNR-B
with the Yim-Bovik blocking-effect factor measured on the test image.

Degradations (bicubic downscale, additive white Gaussian noise, Bayer
mosaicing) are deterministic: AWGN takes an explicit seed, and the bicubic
resampler uses the Keys kernel (a = -0.5) with width scaled by the factor,
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ImagePlane

DEGRADE_KINDS = ("bicubic-down", "awgn", "bayer-rggb")


class MetricError(ValueError):
    """Metric inputs are incompatible (geometry, channel count)."""


def _pair(a: ImagePlane, b: ImagePlane) -> tuple[np.ndarray, np.ndarray]:
    if a.data.shape != b.data.shape:
        raise MetricError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    return a.data.astype(np.float64), b.data.astype(np.float64)


def _psnr_from_mse(mse: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def psnr(a: ImagePlane, b: ImagePlane) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    fa, fb = _pair(a, b)
    return _psnr_from_mse(float(np.mean((fa - fb) ** 2)))


def cpsnr(a: ImagePlane, b: ImagePlane) -> float:
    """Mean of the three per-channel PSNRs (color convention for demosaicing)."""
    fa, fb = _pair(a, b)
    if a.channels != 3:
        raise MetricError(f"cpsnr needs 3-channel images, got {a.channels}")
    per = [_psnr_from_mse(float(np.mean((fa[c] - fb[c]) ** 2))) for c in range(3)]
    return sum(per) / 3.0


def y_channel(img: ImagePlane) -> ImagePlane:
    """BT.601 luma: Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255.

    Rounded half-up to uint8. Gray (128, 128, 128) lands on 125.929 before
    rounding, pure black on exactly 16.
    """
    if img.channels != 3:
        raise MetricError(f"y_channel needs a 3-channel image, got {img.channels}")
    r, g, b = (img.data[c].astype(np.float64) for c in range(3))
    y = 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0
    y8 = np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)
    return ImagePlane(y8[None])


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


def _gaussian_window() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) / 2.0
    coords = np.arange(_SSIM_WINDOW, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * _SSIM_SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    # Valid-window mean of the SSIM map; windows never cross the border.
    from numpy.lib.stride_tricks import sliding_window_view

    k = _gaussian_window()
    wx = sliding_window_view(x, (_SSIM_WINDOW, _SSIM_WINDOW))
    wy = sliding_window_view(y, (_SSIM_WINDOW, _SSIM_WINDOW))
    mu_x = np.einsum("ijkl,kl->ij", wx, k)
    mu_y = np.einsum("ijkl,kl->ij", wy, k)
    e_xx = np.einsum("ijkl,kl->ij", wx * wx, k)
    e_yy = np.einsum("ijkl,kl->ij", wy * wy, k)
    e_xy = np.einsum("ijkl,kl->ij", wx * wy, k)
    var_x = e_xx - mu_x**2
    var_y = e_yy - mu_y**2
    cov = e_xy - mu_x * mu_y
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(a: ImagePlane, b: ImagePlane) -> float:
    """Structural similarity, averaged over channels for color images."""
    fa, fb = _pair(a, b)
    if a.height < _SSIM_WINDOW or a.width < _SSIM_WINDOW:
        raise MetricError(
            f"ssim needs at least {_SSIM_WINDOW}x{_SSIM_WINDOW} pixels, "
            f"got {a.height}x{a.width}"
        )
    scores = [_ssim_plane(fa[c], fb[c]) for c in range(a.channels)]
    return sum(scores) / len(scores)


def _bef_plane(y: np.ndarray, block: int) -> float:
    """Yim-Bovik blocking-effect factor of one plane."""
    h, w = y.shape
    dh = (y[:, 1:] - y[:, :-1]) ** 2
    dv = (y[1:, :] - y[:-1, :]) ** 2
    cols = np.arange(w - 1)
    rows = np.arange(h - 1)
    hb = (cols + 1) % block == 0
    vb = (rows + 1) % block == 0
    n_boundary = h * int(hb.sum()) + w * int(vb.sum())
    n_interior = h * (w - 1) + w * (h - 1) - n_boundary
    if n_boundary == 0 or n_interior == 0:
        return 0.0
    d_b = (float(dh[:, hb].sum()) + float(dv[vb, :].sum())) / n_boundary
    d_bc = (float(dh[:, ~hb].sum()) + float(dv[~vb, :].sum())) / n_interior
    if d_b <= d_bc:
        return 0.0
    eta = math.log2(block) / math.log2(min(h, w))
    return eta * (d_b - d_bc)


def psnr_b(a: ImagePlane, b: ImagePlane, block: int = 8) -> float:
    """PSNR penalized by blockiness of the test image `b` at `block`-aligned edges.

    Reported as 10*log10(255^2 / (MSE + BEF)); the BEF term is nonnegative,
    so psnr_b(a, b) <= psnr(a, b) always.
    """
    if block < 2:
        raise MetricError(f"block size must be >= 2, got {block}")
    fa, fb = _pair(a, b)
    mse = float(np.mean((fa - fb) ** 2))
    bef = sum(_bef_plane(fb[c], block) for c in range(b.channels)) / b.channels
    denom = mse + bef
    if denom == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / denom)


# -- degradations --------------------------------------------------------------


def _keys_kernel(t: np.ndarray) -> np.ndarray:
    # Keys cubic with a = -0.5; support (-2, 2).
    at = np.abs(t)
    near = (1.5 * at - 2.5) * at * at + 1.0
    far = ((-0.5 * at + 2.5) * at - 4.0) * at + 2.0
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _downscale_matrix(n_in: int, factor: int) -> np.ndarray:
    """(n_in // factor, n_in) resampling weights, replicate-padded, rows sum 1."""
    n_out = n_in // factor
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    radius = 2 * factor
    for i in range(n_out):
        center = (i + 0.5) * factor - 0.5
        j0 = int(math.floor(center - radius)) + 1
        taps = np.arange(j0, j0 + 2 * radius, dtype=np.float64)
        weights = _keys_kernel((center - taps) / factor)
        clamped = np.clip(taps.astype(np.int64), 0, n_in - 1)
        np.add.at(mat[i], clamped, weights)
        mat[i] /= mat[i].sum()
    return mat


def _round_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def bicubic_downscale(img: ImagePlane, factor: int) -> ImagePlane:
    """Keys-kernel (a = -0.5) downscale by an integer factor, antialiased.

    Dimensions that the factor does not divide are cropped to the largest
    multiple first (top-left corner kept). factor=1 is the identity.
    """
    if factor < 1:
        raise MetricError(f"downscale factor must be >= 1, got {factor}")
    h = (img.height // factor) * factor
    w = (img.width // factor) * factor
    if h == 0 or w == 0:
        raise MetricError(f"image {img.height}x{img.width} too small for factor {factor}")
    data = img.data[:, :h, :w].astype(np.float64)
    if factor == 1:
        return ImagePlane(img.data[:, :h, :w].copy())
    rows = _downscale_matrix(h, factor)
    cols = _downscale_matrix(w, factor)
    out = np.stack([rows @ data[c] @ cols.T for c in range(img.channels)])
    return ImagePlane(_round_u8(out))


def awgn(img: ImagePlane, sigma: float, seed: int = 0) -> ImagePlane:
    """Seeded additive white Gaussian noise, rounded half-up and clamped."""
    if sigma < 0:
        raise MetricError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=img.data.shape)
    return ImagePlane(_round_u8(img.data.astype(np.float64) + noise))


def bayer_rggb(img: ImagePlane) -> ImagePlane:
    """Pack a color image into its RGGB mosaic (single plane).

    Each site keeps exactly one of the three channel samples: R at even
    row/even column, G at the two mixed-parity sites, B at odd/odd. Odd
    trailing rows or columns are cropped so the phase tiles exactly.
    """
    if img.channels != 3:
        raise MetricError(f"bayer-rggb needs a 3-channel image, got {img.channels}")
    h, w = (img.height // 2) * 2, (img.width // 2) * 2
    if h == 0 or w == 0:
        raise MetricError(f"image {img.height}x{img.width} too small to mosaic")
    r, g, b = img.data[0], img.data[1], img.data[2]
    mosaic = np.empty((h, w), dtype=np.uint8)
    mosaic[0::2, 0::2] = r[0:h:2, 0:w:2]
    mosaic[0::2, 1::2] = g[0:h:2, 1:w:2]
    mosaic[1::2, 0::2] = g[1:h:2, 0:w:2]
    mosaic[1::2, 1::2] = b[1:h:2, 1:w:2]
    return ImagePlane(mosaic[None])


def degrade(
    img: ImagePlane,
    kind: str,
    scale: int | None = None,
    sigma: float | None = None,
    seed: int = 0,
) -> ImagePlane:
    """Dispatch over the supported degradations.

    kind "bicubic-down" takes `scale`, "awgn" takes `sigma` and `seed`,
    "bayer-rggb" takes no parameters.
    """
    if kind == "bicubic-down":
        if scale is None:
            raise MetricError("bicubic-down needs a scale factor")
        return bicubic_downscale(img, scale)
    if kind == "awgn":
        if sigma is None:
            raise MetricError("awgn needs a sigma")
        return awgn(img, sigma, seed)
    if kind == "bayer-rggb":
        return bayer_rggb(img)
    raise MetricError(f"unknown degradation {kind!r}; pick from {', '.join(DEGRADE_KINDS)}")
