"""Random rectangle masks for finetuning.

A mask is a union of axis-aligned rectangles, each randomly centered with
width drawn from (0, w*ratio] and height from (0, h*ratio]. Rectangles that
cross the border are clipped and the clipped area counts. Generation keeps
adding rectangles until the fill fraction reaches ``ratio``; if the random
phase stalls, a deterministic deficit phase places cap-sized rectangles over
the least-covered regions, which always terminates (a single final rectangle
cannot guarantee coverage for arbitrary ratios, so the deficit phase may emit
several).

Every emitted rectangle is returned in the log, and the mask is exactly the
union of the logged rectangles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .errors import ValidationError
from .images import BinaryMask
from .rng import make_rng

DEFAULT_RATIO = 0.5
DEFAULT_MAX_RECTANGLES = 8


@dataclass(frozen=True)
class MaskGenConfig:
    ratio: float = DEFAULT_RATIO
    max_rectangles: int = DEFAULT_MAX_RECTANGLES
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValidationError(f"mask ratio must be in [0, 1], got {self.ratio}")
        if self.max_rectangles < 1:
            raise ValidationError(f"max_rectangles must be >= 1, got {self.max_rectangles}")


@dataclass(frozen=True)
class Rect:
    """Clipped pixel rectangle, half-open: rows [y0, y1), cols [x0, x1)."""

    y0: int
    x0: int
    y1: int
    x1: int

    def area(self) -> int:
        return max(0, self.y1 - self.y0) * max(0, self.x1 - self.x0)


def _clip_rect(cy: float, cx: float, rh: int, rw: int, height: int, width: int) -> Rect | None:
    y0 = int(round(cy - rh / 2.0))
    x0 = int(round(cx - rw / 2.0))
    y1, x1 = y0 + rh, x0 + rw
    y0, x0 = max(0, y0), max(0, x0)
    y1, x1 = min(height, y1), min(width, x1)
    if y1 <= y0 or x1 <= x0:
        return None
    return Rect(y0, x0, y1, x1)


def _random_rect(rng: np.random.Generator, height: int, width: int, ratio: float) -> Rect | None:
    rw = max(1, int(round(rng.uniform(0.0, width * ratio))))
    rh = max(1, int(round(rng.uniform(0.0, height * ratio))))
    cy = rng.uniform(0.0, height)
    cx = rng.uniform(0.0, width)
    return _clip_rect(cy, cx, rh, rw, height, width)


def _deficit_tiles(height: int, width: int, ratio: float) -> List[Rect]:
    """Cap-sized tiles covering the whole image, used to top up coverage."""
    th = min(height, max(1, int(np.ceil(height * ratio))))
    tw = min(width, max(1, int(np.ceil(width * ratio))))
    tiles = []
    for y0 in range(0, height, th):
        for x0 in range(0, width, tw):
            tiles.append(Rect(y0, x0, min(height, y0 + th), min(width, x0 + tw)))
    return tiles


def rasterize(height: int, width: int, rects: Sequence[Rect]) -> BinaryMask:
    """Union of rectangles as a BinaryMask."""
    canvas = np.zeros((height, width), dtype=np.uint8)
    for r in rects:
        canvas[r.y0:r.y1, r.x0:r.x1] = 1
    return BinaryMask(canvas)


def sample_rectangles(height: int, width: int, config: MaskGenConfig) -> List[Rect]:
    """Draw the rectangle set for one mask; deterministic in (h, w, config)."""
    if height < 1 or width < 1:
        raise ValidationError(f"mask dimensions must be positive, got {height}x{width}")
    if config.ratio == 0.0:
        return []

    rng = make_rng(config.seed)
    canvas = np.zeros((height, width), dtype=np.uint8)
    rects: List[Rect] = []

    def covered() -> float:
        return float(canvas.sum()) / float(canvas.size)

    def add(rect: Rect | None) -> None:
        if rect is not None:
            rects.append(rect)
            canvas[rect.y0:rect.y1, rect.x0:rect.x1] = 1

    n_initial = int(rng.integers(1, config.max_rectangles + 1))
    for _ in range(n_initial):
        add(_random_rect(rng, height, width, config.ratio))

    attempts = 0
    while covered() < config.ratio and attempts < config.max_rectangles * 10:
        add(_random_rect(rng, height, width, config.ratio))
        attempts += 1

    if covered() < config.ratio:
        tiles = _deficit_tiles(height, width, config.ratio)
        while covered() < config.ratio:
            uncovered = [(int((1 - canvas[t.y0:t.y1, t.x0:t.x1]).sum()), i) for i, t in enumerate(tiles)]
            gain, idx = max(uncovered, key=lambda p: (p[0], -p[1]))
            if gain == 0:  # cannot happen while coverage < 1, guards float oddities
                break
            add(tiles[idx])

    return rects


def generate_mask(height: int, width: int, config: MaskGenConfig) -> BinaryMask:
    return rasterize(height, width, sample_rectangles(height, width, config))


def mask_batch(views, config: MaskGenConfig) -> List[BinaryMask]:
    """One independently sampled mask per view (seed offset by view index)."""
    view_list = list(views.views) if hasattr(views, "views") else list(views)
    if not view_list:
        raise ValidationError("mask_batch requires at least one view")
    masks = []
    for i, view in enumerate(view_list):
        cfg = MaskGenConfig(ratio=config.ratio, max_rectangles=config.max_rectangles,
                            seed=config.seed + i)
        masks.append(generate_mask(view.height, view.width, cfg))
    return masks


def write_rect_log(rects: Sequence[Rect], path) -> None:
    """One JSON object per line: clipped pixel rectangle coordinates."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in rects:
            fh.write(json.dumps({"y0": r.y0, "x0": r.x0, "y1": r.y1, "x1": r.x1}) + "\n")


def read_rect_log(path) -> List[Rect]:
    rects = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                d = json.loads(line)
                rects.append(Rect(d["y0"], d["x0"], d["y1"], d["x1"]))
    return rects
