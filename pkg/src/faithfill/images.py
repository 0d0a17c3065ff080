"""Core pixel types: RGB image buffers and binary fill masks.

Images live in memory as float64 H×W×3 arrays in [0, 1] and on disk as 8-bit
RGB PNG. Masks are H×W {0,1} arrays, stored as single-channel PNG with
255 = fill, 0 = skip; the fill convention is embedded in the PNG text
metadata so a flipped-convention file fails loudly downstream.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from .errors import ValidationError

FILL_CONVENTION = "1=fill,0=skip"
MASK_CONVENTION_KEY = "faithfill-mask-convention"


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """H×W×3 RGB image, float64 intensities in [0, 1], immutable."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"image must be non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(
                f"image intensities must lie in [0, 1], got range [{arr.min():.4g}, {arr.max():.4g}]"
            )
        object.__setattr__(self, "data", _as_readonly(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def load(cls, path) -> "ImageBuffer":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"image file not found: {path}")
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
        return cls(arr)

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        u8 = np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(u8, mode="RGB").save(path, format="PNG")

    def resized(self, height: int, width: int) -> "ImageBuffer":
        """Bilinear resize in float space (per-channel PIL 'F' mode)."""
        if (height, width) == (self.height, self.width):
            return self
        chans = []
        for c in range(3):
            im = Image.fromarray(self.data[:, :, c].astype(np.float32), mode="F")
            im = im.resize((width, height), resample=Image.BILINEAR)
            chans.append(np.asarray(im, dtype=np.float64))
        arr = np.clip(np.stack(chans, axis=2), 0.0, 1.0)
        return ImageBuffer(arr)


@dataclass(frozen=True)
class BinaryMask:
    """H×W mask with values in {0, 1}; 1 marks the region to fill."""

    data: np.ndarray
    convention: str = FILL_CONVENTION

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"mask must be a non-empty H x W array, got shape {arr.shape}")
        uniq = np.unique(arr)
        if not np.isin(uniq, (0, 1)).all():
            raise ValidationError(f"mask values must be in {{0, 1}}, got {uniq[:8]}")
        object.__setattr__(self, "data", _as_readonly(arr.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def fill_fraction(self) -> float:
        return float(self.data.sum()) / float(self.data.size)

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def ones(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=np.uint8))

    @classmethod
    def load(cls, path) -> "BinaryMask":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"mask file not found: {path}")
        with Image.open(path) as im:
            convention = im.text.get(MASK_CONVENTION_KEY, FILL_CONVENTION) if hasattr(im, "text") else FILL_CONVENTION
            arr = np.asarray(im.convert("L"))
        return cls((arr >= 128).astype(np.uint8), convention=convention)

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        info = PngImagePlugin.PngInfo()
        info.add_text(MASK_CONVENTION_KEY, self.convention)
        Image.fromarray(self.data * np.uint8(255), mode="L").save(path, format="PNG", pnginfo=info)

    def resized(self, height: int, width: int) -> "BinaryMask":
        """Nearest-neighbour resize, then re-binarize at 0.5."""
        if (height, width) == (self.height, self.width):
            return self
        im = Image.fromarray(self.data * np.uint8(255), mode="L")
        im = im.resize((width, height), resample=Image.NEAREST)
        arr = (np.asarray(im) >= 128).astype(np.uint8)
        return dataclasses.replace(self, data=arr)

    def assert_fill_convention(self) -> None:
        if self.convention != FILL_CONVENTION:
            raise ValidationError(
                f"mask declares convention {self.convention!r}; this pipeline requires "
                f"{FILL_CONVENTION!r} (1 marks the region to fill)"
            )
