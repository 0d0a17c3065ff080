"""Object extraction and multi-view synthesis behind pluggable backends.

Toy backends (threshold segmenter, seeded affine view synthesizer) run in CI.
The heavy segmentation / NeRF view-synthesis models are reached through
adapter classes that only define the contract here; they raise until a model
callable is bound at integration time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import BackendError, SegmentationEmptyError, ValidationError
from .images import ImageBuffer
from .rng import make_rng

DEFAULT_CANVAS_GRAY = 0.5


@dataclass(frozen=True)
class ObjectCutout:
    """RGBA cutout: alpha in [0,1], bbox is the tight box of alpha > 0."""

    rgba: np.ndarray
    bbox: Tuple[int, int, int, int]  # (y0, x0, y1, x1), half-open
    source_id: str = ""

    def __post_init__(self):
        arr = np.asarray(self.rgba, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValidationError(f"cutout must be H x W x 4, got {arr.shape}")
        alpha = arr[:, :, 3]
        if alpha.min() < 0.0 or alpha.max() > 1.0:
            raise ValidationError("cutout alpha must lie in [0, 1]")
        object.__setattr__(self, "rgba", arr)

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    def is_empty(self) -> bool:
        return not (self.rgba[:, :, 3] > 0).any()


@dataclass(frozen=True)
class ViewSet:
    """Ordered views; index 0 is always the original (un-rotated) view."""

    views: Tuple[ImageBuffer, ...]
    provenance: Tuple[dict, ...]
    backend: str

    def __post_init__(self):
        if len(self.views) < 1:
            raise ValidationError("a ViewSet needs at least one view")
        if len(self.views) != len(self.provenance):
            raise ValidationError("one provenance record per view required")
        sizes = {(v.height, v.width) for v in self.views}
        if len(sizes) != 1:
            raise ValidationError(f"all views must share one resolution, got {sizes}")

    def __len__(self) -> int:
        return len(self.views)


class SegmenterBackend(Protocol):
    name: str

    def segment(self, image: ImageBuffer, hint=None) -> ObjectCutout: ...


class ViewBackend(Protocol):
    name: str
    stateless: bool

    def synthesize(self, cutout: ObjectCutout, n: int) -> ViewSet: ...


def _tight_bbox(alpha: np.ndarray) -> Tuple[int, int, int, int]:
    ys, xs = np.nonzero(alpha > 0)
    return int(ys.min()), int(xs.min()), int(ys.max()) + 1, int(xs.max()) + 1


def composite_on_canvas(rgba: np.ndarray, gray: float = DEFAULT_CANVAS_GRAY) -> ImageBuffer:
    """Alpha-blend a cutout onto a flat gray canvas."""
    alpha = rgba[:, :, 3:4]
    rgb = rgba[:, :, :3] * alpha + gray * (1.0 - alpha)
    return ImageBuffer(np.clip(rgb, 0.0, 1.0))


class ThresholdSegmenter:
    """Toy segmenter: foreground = pixels far from the background color.

    The background color defaults to the median of the 1-px border ring. A box
    hint restricts the matte to the box; a point hint keeps only the connected
    component containing the point.
    """

    name = "toy-threshold"

    def __init__(self, threshold: float = 0.12, background_color=None):
        self.threshold = threshold
        self.background_color = background_color

    def segment(self, image: ImageBuffer, hint=None) -> ObjectCutout:
        data = image.data
        h, w = image.height, image.width
        if self.background_color is None:
            border = np.concatenate([
                data[0, :, :], data[-1, :, :], data[:, 0, :], data[:, -1, :]
            ])
            bg = np.median(border, axis=0)
        else:
            bg = np.asarray(self.background_color, dtype=np.float64)
        dist = np.abs(data - bg).max(axis=2)
        alpha = (dist > self.threshold).astype(np.float64)

        if hint is not None:
            hint = tuple(int(v) for v in hint)
            if len(hint) == 4:
                y0, x0, y1, x1 = hint
                if not (0 <= y0 < y1 <= h and 0 <= x0 < x1 <= w):
                    raise ValidationError(f"hint box {hint} outside image bounds {h}x{w}")
                keep = np.zeros_like(alpha)
                keep[y0:y1, x0:x1] = 1.0
                alpha = alpha * keep
            elif len(hint) == 2:
                y, x = hint
                if not (0 <= y < h and 0 <= x < w):
                    raise ValidationError(f"hint point {hint} outside image bounds {h}x{w}")
                labels, _ = ndimage.label(alpha > 0)
                wanted = labels[y, x]
                alpha = (labels == wanted).astype(np.float64) if wanted != 0 else np.zeros_like(alpha)
            else:
                raise ValidationError("hint must be a (y, x) point or a (y0, x0, y1, x1) box")

        if not (alpha > 0).any():
            raise SegmentationEmptyError(self.name)
        rgba = np.concatenate([data, alpha[:, :, None]], axis=2)
        return ObjectCutout(rgba=rgba, bbox=_tight_bbox(alpha))


class SamSegmenterAdapter:
    """Adapter seam for a promptable segmentation model.

    Bind a callable ``(image_hw3, hint) -> alpha_hw`` from the integration
    environment; without one this backend refuses to run.
    """

    name = "sam"

    def __init__(self, model: Optional[Callable] = None, checkpoint_dir: Optional[str] = None):
        self.model = model
        self.checkpoint_dir = checkpoint_dir

    def segment(self, image: ImageBuffer, hint=None) -> ObjectCutout:
        if self.model is None:
            raise BackendError(self.name, "no segmentation model bound "
                               "(set FAITHFILL_BACKEND_DIR and inject a model callable)")
        alpha = np.asarray(self.model(image.data, hint), dtype=np.float64)
        if alpha.shape != (image.height, image.width):
            raise BackendError(self.name, f"model returned alpha {alpha.shape}, "
                               f"expected {(image.height, image.width)}")
        alpha = np.clip(alpha, 0.0, 1.0)
        if not (alpha > 0).any():
            raise SegmentationEmptyError(self.name)
        rgba = np.concatenate([image.data, alpha[:, :, None]], axis=2)
        return ObjectCutout(rgba=rgba, bbox=_tight_bbox(alpha))


def _affine_params(rng: np.random.Generator) -> dict:
    return {
        "angle_deg": float(rng.uniform(-30.0, 30.0)),
        "scale": float(rng.uniform(0.75, 1.25)),
        "shift_y": float(rng.uniform(-0.1, 0.1)),
        "shift_x": float(rng.uniform(-0.1, 0.1)),
        "flip": bool(rng.integers(2)),
    }


def _apply_affine(rgba: np.ndarray, params: dict) -> np.ndarray:
    """Rotate/scale/shift/flip an RGBA cutout about its center (bilinear)."""
    h, w = rgba.shape[:2]
    u8 = np.clip(np.rint(rgba * 255.0), 0, 255).astype(np.uint8)
    im = Image.fromarray(u8, mode="RGBA")
    if params["flip"]:
        im = im.transpose(Image.FLIP_LEFT_RIGHT)
    theta = np.deg2rad(params["angle_deg"])
    s = params["scale"]
    # inverse map for PIL.transform: output (x, y) -> input coords
    cos_t, sin_t = np.cos(theta) / s, np.sin(theta) / s
    cx, cy = w / 2.0, h / 2.0
    tx, ty = params["shift_x"] * w, params["shift_y"] * h
    a, b = cos_t, sin_t
    d, e = -sin_t, cos_t
    c = cx - a * (cx + tx) - b * (cy + ty)
    f = cy - d * (cx + tx) - e * (cy + ty)
    im = im.transform((w, h), Image.AFFINE, (a, b, c, d, e, f), resample=Image.BILINEAR)
    return np.asarray(im, dtype=np.float64) / 255.0


class AffineViewSynthesizer:
    """Toy view generator: the original plus seeded affine/flip variants."""

    name = "toy-affine"
    stateless = True

    def __init__(self, seed: int = 0, canvas_gray: float = DEFAULT_CANVAS_GRAY):
        self.seed = seed
        self.canvas_gray = canvas_gray

    def synthesize(self, cutout: ObjectCutout, n: int) -> ViewSet:
        rng = make_rng(self.seed)
        views: List[ImageBuffer] = [composite_on_canvas(cutout.rgba, self.canvas_gray)]
        provenance: List[dict] = [{"view": 1, "transform": "identity", "canvas_gray": self.canvas_gray}]
        for i in range(2, n + 1):
            params = _affine_params(rng)
            try:
                warped = _apply_affine(cutout.rgba, params)
            except Exception as exc:  # noqa: BLE001
                raise BackendError(self.name, f"view {i} synthesis failed: {exc}") from exc
            views.append(composite_on_canvas(warped, self.canvas_gray))
            provenance.append({"view": i, **params, "canvas_gray": self.canvas_gray, "seed": self.seed})
        return ViewSet(views=tuple(views), provenance=tuple(provenance), backend=self.name)


class NerfViewAdapter:
    """Adapter seam for a diffusion-NeRF multi-view synthesizer.

    Camera poses are parameters, not constants: pass the azimuth/elevation
    list the bound model should render. Bind a callable
    ``(rgba, poses, seed) -> list[rgb_hw3]``.
    """

    name = "nerf"
    stateless = True

    def __init__(self, model: Optional[Callable] = None, poses: Optional[Sequence[dict]] = None,
                 seed: int = 0, canvas_gray: float = DEFAULT_CANVAS_GRAY):
        self.model = model
        self.poses = list(poses) if poses is not None else [
            {"azimuth_deg": az, "elevation_deg": 15.0} for az in (45.0, 90.0, 180.0, 270.0, 315.0)
        ]
        self.seed = seed
        self.canvas_gray = canvas_gray

    def synthesize(self, cutout: ObjectCutout, n: int) -> ViewSet:
        if self.model is None:
            raise BackendError(self.name, "no view-synthesis model bound "
                               "(set FAITHFILL_BACKEND_DIR and inject a model callable)")
        if n - 1 > len(self.poses):
            raise BackendError(self.name, f"{n - 1} novel views requested but only "
                               f"{len(self.poses)} poses configured")
        views = [composite_on_canvas(cutout.rgba, self.canvas_gray)]
        provenance = [{"view": 1, "transform": "identity", "seed": self.seed}]
        rendered = self.model(cutout.rgba, self.poses[: n - 1], self.seed)
        for i, rgb in enumerate(rendered, start=2):
            views.append(ImageBuffer(np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)))
            provenance.append({"view": i, **self.poses[i - 2], "seed": self.seed})
        return ViewSet(views=tuple(views), provenance=tuple(provenance), backend=self.name)


def segment_object(image: ImageBuffer, hint, backend: SegmenterBackend) -> ObjectCutout:
    """Extract the designated object; empty mattes raise, never pass silently."""
    cutout = backend.segment(image, hint)
    if (cutout.height, cutout.width) != (image.height, image.width):
        raise BackendError(getattr(backend, "name", "segmenter"),
                           "cutout dimensions must equal input dimensions")
    if cutout.is_empty():
        raise SegmentationEmptyError(getattr(backend, "name", "segmenter"))
    return cutout


def generate_views(cutout: ObjectCutout, n: int, backend: ViewBackend) -> ViewSet:
    if n < 1:
        raise ValidationError(f"view count must be >= 1, got {n}")
    if cutout.is_empty():
        raise ValidationError("cannot synthesize views from an empty cutout")
    viewset = backend.synthesize(cutout, n)
    if len(viewset) != n:
        raise BackendError(getattr(backend, "name", "viewgen"),
                           f"requested {n} views, backend returned {len(viewset)}")
    return viewset
