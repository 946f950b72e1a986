"""Metrics against naive scalar references, plus degradation properties.

Each oracle below is written as plain Python loops straight from the metric
definition, sharing no array code with the module under test; agreement is
required to 1e-9.
"""

import math

import numpy as np
import pytest

from mulut.core import ImagePlane
from mulut.evalkit import (
    DEGRADE_KINDS,
    MetricError,
    awgn,
    bayer_rggb,
    bicubic_downscale,
    cpsnr,
    degrade,
    psnr,
    psnr_b,
    ssim,
    y_channel,
)


def _rand_pair(shape, seed, spread=40):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, shape, dtype=np.uint8)
    noise = rng.integers(-spread, spread + 1, shape)
    b = np.clip(a.astype(np.int64) + noise, 0, 255).astype(np.uint8)
    return ImagePlane(a), ImagePlane(b)


def _psnr_oracle(a, b):
    total, count = 0.0, 0
    for c in range(a.data.shape[0]):
        for y in range(a.data.shape[1]):
            for x in range(a.data.shape[2]):
                d = float(a.data[c, y, x]) - float(b.data[c, y, x])
                total += d * d
                count += 1
    if total == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / (total / count))


def _cpsnr_oracle(a, b):
    vals = []
    for c in range(3):
        pa = ImagePlane(a.data[c])
        pb = ImagePlane(b.data[c])
        vals.append(_psnr_oracle(pa, pb))
    return sum(vals) / 3.0


def _y_oracle(img):
    h, w = img.data.shape[1:]
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            r, g, b = (float(img.data[c, y, x]) for c in range(3))
            v = 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0
            out[y, x] = int(min(max(math.floor(v + 0.5), 0), 255))
    return out


def _gauss_oracle():
    k = [[0.0] * 11 for _ in range(11)]
    s = 0.0
    for i in range(11):
        for j in range(11):
            di, dj = i - 5.0, j - 5.0
            k[i][j] = math.exp(-(di * di) / 4.5) * math.exp(-(dj * dj) / 4.5)
            s += k[i][j]
    return [[v / s for v in row] for row in k]


def _ssim_oracle(a, b):
    k = _gauss_oracle()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    chans = a.data.shape[0]
    scores = []
    for c in range(chans):
        h, w = a.data.shape[1:]
        vals = []
        for y0 in range(h - 10):
            for x0 in range(w - 10):
                mx = my = exx = eyy = exy = 0.0
                for i in range(11):
                    for j in range(11):
                        wv = k[i][j]
                        xv = float(a.data[c, y0 + i, x0 + j])
                        yv = float(b.data[c, y0 + i, x0 + j])
                        mx += wv * xv
                        my += wv * yv
                        exx += wv * xv * xv
                        eyy += wv * yv * yv
                        exy += wv * xv * yv
                vx, vy, cov = exx - mx * mx, eyy - my * my, exy - mx * my
                num = (2 * mx * my + c1) * (2 * cov + c2)
                den = (mx * mx + my * my + c1) * (vx + vy + c2)
                vals.append(num / den)
        scores.append(sum(vals) / len(vals))
    return sum(scores) / chans


def _bef_oracle(plane, block):
    h, w = plane.shape
    sb = si = 0.0
    nb = ni = 0
    for y in range(h):
        for x in range(w - 1):
            d = (float(plane[y, x + 1]) - float(plane[y, x])) ** 2
            if (x + 1) % block == 0:
                sb, nb = sb + d, nb + 1
            else:
                si, ni = si + d, ni + 1
    for y in range(h - 1):
        for x in range(w):
            d = (float(plane[y + 1, x]) - float(plane[y, x])) ** 2
            if (y + 1) % block == 0:
                sb, nb = sb + d, nb + 1
            else:
                si, ni = si + d, ni + 1
    if nb == 0 or ni == 0:
        return 0.0
    db, di = sb / nb, si / ni
    if db <= di:
        return 0.0
    return (math.log2(block) / math.log2(min(h, w))) * (db - di)


def _psnr_b_oracle(a, b, block=8):
    total, count = 0.0, 0
    chans = a.data.shape[0]
    for c in range(chans):
        for y in range(a.data.shape[1]):
            for x in range(a.data.shape[2]):
                d = float(a.data[c, y, x]) - float(b.data[c, y, x])
                total += d * d
                count += 1
    mse = total / count
    bef = sum(_bef_oracle(b.data[c], block) for c in range(chans)) / chans
    if mse + bef == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / (mse + bef))


def _blocky(img, block=8):
    # average each block to a constant so boundary steps dominate
    arr = img.data.astype(np.float64)
    out = np.empty_like(arr)
    for c in range(arr.shape[0]):
        for y0 in range(0, arr.shape[1], block):
            for x0 in range(0, arr.shape[2], block):
                tile = arr[c, y0 : y0 + block, x0 : x0 + block]
                out[c, y0 : y0 + block, x0 : x0 + block] = tile.mean()
    return ImagePlane(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


class TestPsnr:
    def test_matches_oracle(self):
        for seed in range(4):
            a, b = _rand_pair((1, 9, 13), seed)
            assert psnr(a, b) == pytest.approx(_psnr_oracle(a, b), abs=1e-9)
        a, b = _rand_pair((3, 7, 8), 9)
        assert psnr(a, b) == pytest.approx(_psnr_oracle(a, b), abs=1e-9)

    def test_identical_is_inf(self):
        a, _ = _rand_pair((1, 6, 6), 0)
        assert psnr(a, a) == math.inf

    def test_shape_mismatch(self):
        a, _ = _rand_pair((1, 6, 6), 0)
        b, _ = _rand_pair((1, 6, 7), 0)
        with pytest.raises(MetricError):
            psnr(a, b)


class TestCpsnr:
    def test_matches_oracle(self):
        for seed in range(3):
            a, b = _rand_pair((3, 8, 9), seed + 20)
            assert cpsnr(a, b) == pytest.approx(_cpsnr_oracle(a, b), abs=1e-9)

    def test_rejects_gray(self):
        a, b = _rand_pair((1, 8, 9), 0)
        with pytest.raises(MetricError):
            cpsnr(a, b)


class TestYChannel:
    def test_matches_oracle(self):
        a, _ = _rand_pair((3, 10, 11), 31)
        assert np.array_equal(y_channel(a).data[0], _y_oracle(a))

    def test_frozen_points(self):
        black = ImagePlane(np.zeros((3, 2, 2), np.uint8))
        assert np.all(y_channel(black).data == 16)
        gray = ImagePlane(np.full((3, 2, 2), 128, np.uint8))
        # 16 + 218.999... * 128 / 255 = 125.929 -> rounds to 126
        assert np.all(y_channel(gray).data == 126)

    def test_rejects_gray_input(self):
        with pytest.raises(MetricError):
            y_channel(ImagePlane(np.zeros((2, 2), np.uint8)))


class TestSsim:
    def test_matches_oracle(self):
        a, b = _rand_pair((1, 13, 14), 40)
        assert ssim(a, b) == pytest.approx(_ssim_oracle(a, b), abs=1e-9)
        a, b = _rand_pair((3, 11, 12), 41)
        assert ssim(a, b) == pytest.approx(_ssim_oracle(a, b), abs=1e-9)

    def test_identical_is_one(self):
        a, _ = _rand_pair((1, 12, 12), 42)
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_minimum_window(self):
        a, b = _rand_pair((1, 10, 12), 43)
        with pytest.raises(MetricError):
            ssim(a, b)


class TestPsnrB:
    def test_matches_oracle(self):
        for seed in range(3):
            a, b = _rand_pair((1, 16, 24), seed + 50)
            bb = _blocky(b)
            assert psnr_b(a, bb) == pytest.approx(_psnr_b_oracle(a, bb), abs=1e-9)
        a, b = _rand_pair((3, 16, 16), 54)
        assert psnr_b(a, b) == pytest.approx(_psnr_b_oracle(a, b), abs=1e-9)

    def test_never_exceeds_psnr(self):
        for seed in range(6):
            a, b = _rand_pair((1, 16, 16), seed + 60)
            bb = _blocky(b)
            assert psnr_b(a, bb) <= psnr(a, bb)

    def test_identical_smooth_pair_is_inf(self):
        flat = ImagePlane(np.full((1, 16, 16), 77, np.uint8))
        assert psnr_b(flat, flat) == math.inf

    def test_identical_blocky_pair_is_finite(self):
        a, _ = _rand_pair((1, 16, 16), 70)
        bb = _blocky(a)
        assert psnr(bb, bb) == math.inf
        assert psnr_b(bb, bb) < math.inf

    def test_alternate_block_size(self):
        a, b = _rand_pair((1, 16, 16), 71)
        bb = _blocky(b, block=4)
        assert psnr_b(a, bb, block=4) == pytest.approx(
            _psnr_b_oracle(a, bb, block=4), abs=1e-9
        )
        with pytest.raises(MetricError):
            psnr_b(a, b, block=1)


def _keys_oracle(t):
    at = abs(t)
    if at <= 1.0:
        return (1.5 * at - 2.5) * at * at + 1.0
    if at < 2.0:
        return ((-0.5 * at + 2.5) * at - 4.0) * at + 2.0
    return 0.0


def _bicubic_oracle(img, factor):
    h = (img.height // factor) * factor
    w = (img.width // factor) * factor
    data = img.data[:, :h, :w].astype(np.float64)

    def axis_weights(n_in):
        n_out = n_in // factor
        mat = [[0.0] * n_in for _ in range(n_out)]
        for i in range(n_out):
            center = (i + 0.5) * factor - 0.5
            j0 = int(math.floor(center - 2 * factor)) + 1
            total = 0.0
            for tap in range(j0, j0 + 4 * factor):
                wv = _keys_oracle((center - tap) / factor)
                mat[i][min(max(tap, 0), n_in - 1)] += wv
                total += wv
            for j in range(n_in):
                mat[i][j] /= total
        return mat

    rows, cols = axis_weights(h), axis_weights(w)
    out = np.empty((img.channels, h // factor, w // factor))
    for c in range(img.channels):
        for i in range(h // factor):
            for j in range(w // factor):
                acc = 0.0
                for u in range(h):
                    if rows[i][u] == 0.0:
                        continue
                    for v in range(w):
                        if cols[j][v]:
                            acc += rows[i][u] * cols[j][v] * data[c, u, v]
                out[c, i, j] = acc
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


class TestDegrade:
    def test_bicubic_matches_oracle(self):
        a, _ = _rand_pair((1, 12, 10), 80)
        assert np.array_equal(bicubic_downscale(a, 2).data, _bicubic_oracle(a, 2))
        b, _ = _rand_pair((3, 9, 12), 81)
        assert np.array_equal(bicubic_downscale(b, 3).data, _bicubic_oracle(b, 3))

    def test_bicubic_identity_at_factor_one(self):
        a, _ = _rand_pair((1, 7, 9), 82)
        assert bicubic_downscale(a, 1) == a

    def test_bicubic_crops_nondividing(self):
        a, _ = _rand_pair((1, 11, 13), 83)
        out = bicubic_downscale(a, 4)
        assert out.data.shape == (1, 2, 3)

    def test_bicubic_flat_image_stays_flat(self):
        flat = ImagePlane(np.full((1, 16, 16), 201, np.uint8))
        assert np.all(bicubic_downscale(flat, 2).data == 201)

    def test_awgn_seeded(self):
        a, _ = _rand_pair((1, 10, 10), 84)
        x = awgn(a, 10.0, seed=5)
        y = awgn(a, 10.0, seed=5)
        z = awgn(a, 10.0, seed=6)
        assert x == y
        assert x != z
        assert awgn(a, 0.0, seed=1) == a

    def test_bayer_site_routing(self):
        rng = np.random.default_rng(85)
        arr = rng.integers(0, 256, (3, 6, 8), dtype=np.uint8)
        img = ImagePlane(arr)
        mosaic = bayer_rggb(img).data[0]
        assert np.array_equal(mosaic[0::2, 0::2], arr[0, 0::2, 0::2])
        assert np.array_equal(mosaic[0::2, 1::2], arr[1, 0::2, 1::2])
        assert np.array_equal(mosaic[1::2, 0::2], arr[1, 1::2, 0::2])
        assert np.array_equal(mosaic[1::2, 1::2], arr[2, 1::2, 1::2])

    def test_bayer_crops_odd_edges(self):
        rng = np.random.default_rng(86)
        img = ImagePlane(rng.integers(0, 256, (3, 7, 9), dtype=np.uint8))
        assert bayer_rggb(img).data.shape == (1, 6, 8)

    def test_dispatcher(self):
        a, _ = _rand_pair((3, 8, 8), 87)
        assert degrade(a, "bicubic-down", scale=2) == bicubic_downscale(a, 2)
        assert degrade(a, "awgn", sigma=5.0, seed=3) == awgn(a, 5.0, 3)
        assert degrade(a, "bayer-rggb") == bayer_rggb(a)
        assert set(DEGRADE_KINDS) == {"bicubic-down", "awgn", "bayer-rggb"}
        with pytest.raises(MetricError):
            degrade(a, "sepia")
        with pytest.raises(MetricError):
            degrade(a, "bicubic-down")
        with pytest.raises(MetricError):
            degrade(a, "awgn")
