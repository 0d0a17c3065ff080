"""Pixel <-> latent codecs.

The toy codec is a fixed per-pixel linear lift of centered RGB into 4
channels, with pseudo-inverse decode. At downsample factor 1 (the default)
encode and decode are exact inverses, which keeps every downstream identity
checkable; factors > 1 average-pool first and are lossy, mirroring a real
autoencoder's resolution reduction.

Masks enter the latent stack by area-averaging to latent resolution and
re-thresholding at 0.5.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
import torch

from ..errors import ValidationError
from ..images import BinaryMask, ImageBuffer

# fixed 4x3 lift, full column rank
_LIFT = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
], dtype=np.float64)


class LatentCodec(Protocol):
    channels: int
    downsample: int

    def encode(self, image: ImageBuffer) -> torch.Tensor: ...

    def decode(self, z: torch.Tensor) -> ImageBuffer: ...


def _block_mean(arr: np.ndarray, f: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if h % f or w % f:
        raise ValidationError(f"resolution {h}x{w} not divisible by downsample factor {f}")
    return arr.reshape(h // f, f, w // f, f, -1).mean(axis=(1, 3))


def mask_to_latent(mask: BinaryMask, downsample: int = 1) -> torch.Tensor:
    """(1, h, w) float mask at latent resolution: area-average then >= 0.5."""
    arr = mask.data.astype(np.float64)
    if downsample > 1:
        arr = _block_mean(arr[:, :, None], downsample)[:, :, 0]
        arr = (arr >= 0.5).astype(np.float64)
    return torch.from_numpy(arr[None, :, :].copy())


class ToyLatentCodec:
    """Exact-inverse linear codec at factor 1; lossy average-pool above."""

    def __init__(self, downsample: int = 1):
        if downsample < 1:
            raise ValidationError(f"downsample factor must be >= 1, got {downsample}")
        self.channels = 4
        self.downsample = downsample
        self._lift = _LIFT
        self._unlift = np.linalg.pinv(_LIFT)

    def encode(self, image: ImageBuffer) -> torch.Tensor:
        y = image.data - 0.5
        if self.downsample > 1:
            y = _block_mean(y, self.downsample)
        z = np.einsum("hwc,kc->khw", y, self._lift)
        return torch.from_numpy(np.ascontiguousarray(z))

    def encode_array(self, pixels: np.ndarray) -> torch.Tensor:
        """Encode a raw H x W x 3 array (used for masked views)."""
        return self.encode(ImageBuffer(np.clip(pixels, 0.0, 1.0)))

    def decode(self, z: torch.Tensor) -> ImageBuffer:
        zn = np.asarray(z.detach().cpu(), dtype=np.float64)
        if zn.ndim != 3 or zn.shape[0] != self.channels:
            raise ValidationError(f"latent must be ({self.channels}, h, w), got {zn.shape}")
        y = np.einsum("khw,ck->hwc", zn, self._unlift)
        if self.downsample > 1:
            y = y.repeat(self.downsample, axis=0).repeat(self.downsample, axis=1)
        return ImageBuffer(np.clip(y + 0.5, 0.0, 1.0))

    def latent_shape(self, height: int, width: int) -> tuple:
        return (self.channels, height // self.downsample, width // self.downsample)

    def mask_to_latent(self, mask: BinaryMask) -> torch.Tensor:
        return mask_to_latent(mask, self.downsample)
