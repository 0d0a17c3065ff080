"""Image similarity metrics.

SSIM and PSNR are computed exactly here (no metric library): SSIM with the
canonical 11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, dynamic range
1.0, averaged over valid window positions and channels. Feature-space metrics
are defined against the embedder interface so the same math runs on stub
embedders in CI and on real checkpoints at scale.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..errors import ValidationError
from ..images import BinaryMask, ImageBuffer

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_EPS = 1e-10


def _check_same_shape(a: ImageBuffer, b: ImageBuffer) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValidationError(
            f"images must share dimensions, got {a.height}x{a.width} vs {b.height}x{b.width}")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = size // 2
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    k = np.exp(-(yy ** 2 + xx ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean SSIM over valid 11x11 windows and the three channels."""
    _check_same_shape(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValidationError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {a.height}x{a.width}")
    kernel = gaussian_window()
    half = SSIM_WINDOW // 2
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2

    def local_mean(img: np.ndarray) -> np.ndarray:
        out = ndimage.correlate(img, kernel, mode="constant")
        return out[half:-half, half:-half]

    values = []
    for c in range(3):
        x, y = a.data[:, :, c], b.data[:, :, c]
        mu_x, mu_y = local_mean(x), local_mean(y)
        var_x = local_mean(x * x) - mu_x ** 2
        var_y = local_mean(y * y) - mu_y ** 2
        cov = local_mean(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        values.append((num / den).mean())
    return float(np.mean(values))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """10*log10(1/MSE) in dB with unit dynamic range; inf for identical inputs."""
    _check_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def psnr_masked(a: ImageBuffer, b: ImageBuffer, mask: BinaryMask) -> float:
    """PSNR over mask==1 pixels only."""
    _check_same_shape(a, b)
    sel = mask.data.astype(bool)
    if not sel.any():
        raise ValidationError("mask selects no pixels for masked PSNR")
    mse = float(np.mean((a.data[sel] - b.data[sel]) ** 2))
    return math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = u.ravel().astype(np.float64)
    v = v.ravel().astype(np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("zero-norm embedding; cosine similarity undefined")
    return float(np.dot(u, v) / (nu * nv))


def cosine_metric(a: ImageBuffer, b: ImageBuffer, embedder) -> float:
    """Cosine similarity of embeddings; per-layer mean for feature stacks."""
    ea, eb = embedder.embed(a), embedder.embed(b)
    if isinstance(ea, list):
        if len(ea) != len(eb):
            raise ValidationError("embedder returned stacks of different depth")
        return float(np.mean([_cosine(x, y) for x, y in zip(ea, eb)]))
    return _cosine(ea, eb)


def perceptual_distance(a: ImageBuffer, b: ImageBuffer, embedder) -> float:
    """Lower-is-better feature distance.

    Feature-stack embedders use the learned-perceptual convention: channel
    unit-normalization at each spatial site, squared differences summed over
    channels, averaged spatially, summed over layers (unit layer weights for
    stubs; a bound checkpoint applies its own). Single-embedding backends use
    cosine distance (1 - cosine).
    """
    fa, fb = embedder.embed(a), embedder.embed(b)
    if isinstance(fa, list):
        total = 0.0
        for x, y in zip(fa, fb):
            xn = x / np.sqrt((x ** 2).sum(axis=0, keepdims=True) + _EPS)
            yn = y / np.sqrt((y ** 2).sum(axis=0, keepdims=True) + _EPS)
            total += float(((xn - yn) ** 2).sum(axis=0).mean())
        return total
    return 1.0 - _cosine(fa, fb)


def crop_to_mask_bbox(image: ImageBuffer, mask: BinaryMask,
                      min_size: int = SSIM_WINDOW) -> ImageBuffer:
    """Tight crop around the fill region, grown to at least min_size."""
    ys, xs = np.nonzero(mask.data)
    if ys.size == 0:
        raise ValidationError("mask selects no pixels to crop to")
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1

    def grow(lo: int, hi: int, limit: int) -> Tuple[int, int]:
        while hi - lo < min(min_size, limit):
            if lo > 0:
                lo -= 1
            if hi < limit and hi - lo < min(min_size, limit):
                hi += 1
        return lo, hi

    y0, y1 = grow(y0, y1, image.height)
    x0, x1 = grow(x0, x1, image.width)
    return ImageBuffer(image.data[y0:y1, x0:x1, :])
