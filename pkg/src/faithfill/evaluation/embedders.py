"""Embedder backends for the feature-space metrics.

Stub embedders are deterministic analytic functions of the pixels, so the
metric math is fully testable without any checkpoint. The real backends
(clip, dino-vits16, lpips-net, dreamsim) are adapter seams: they hold the
published name and output kind but refuse to run until a model callable is
bound in the integration environment.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Protocol, Union

import numpy as np

from ..errors import BackendError
from ..images import ImageBuffer
from ..rng import make_rng, stable_seed

Embedding = Union[np.ndarray, List[np.ndarray]]


class EmbedderBackend(Protocol):
    name: str
    kind: str  # "embedding" (one vector) or "features" (per-layer stack)

    def embed(self, image: ImageBuffer) -> Embedding: ...


class MomentEmbedder:
    """Channel means/stds plus per-quadrant channel means (18-dim vector).

    Each named instance reweights the moments with a fixed positive vector
    derived from its name, so stub clip/dino/dreamsim report distinct values.
    """

    kind = "embedding"

    def __init__(self, name: str = "stub-moments"):
        self.name = name
        rng = make_rng(stable_seed("moment-embedder", name))
        self._weights = rng.uniform(0.5, 1.5, size=18)

    def embed(self, image: ImageBuffer) -> np.ndarray:
        data = image.data
        h2, w2 = image.height // 2, image.width // 2
        quads = [data[:h2, :w2], data[:h2, w2:], data[h2:, :w2], data[h2:, w2:]]
        parts = [data.mean(axis=(0, 1)), data.std(axis=(0, 1))]
        parts += [q.mean(axis=(0, 1)) for q in quads]
        return np.concatenate(parts) * self._weights


class GradientFeatureEmbedder:
    """Two-layer feature stack: raw channels and forward-difference gradients."""

    kind = "features"

    def __init__(self, name: str = "stub-gradients"):
        self.name = name

    def embed(self, image: ImageBuffer) -> List[np.ndarray]:
        chw = np.moveaxis(image.data, 2, 0)
        gray = image.data.mean(axis=2)
        dy = np.diff(gray, axis=0)[:, :-1]
        dx = np.diff(gray, axis=1)[:-1, :]
        return [chw, np.stack([dy, dx], axis=0)]


class CheckpointEmbedderAdapter:
    """Seam for a pretrained feature extractor; integration-only."""

    def __init__(self, name: str, kind: str, model: Optional[Callable] = None,
                 checkpoint_dir: Optional[str] = None):
        self.name = name
        self.kind = kind
        self.model = model
        self.checkpoint_dir = checkpoint_dir

    def embed(self, image: ImageBuffer) -> Embedding:
        if self.model is None:
            raise BackendError(self.name, "no checkpoint bound "
                               "(set FAITHFILL_BACKEND_DIR and inject a model callable)")
        return self.model(image.data)


def get_embedders(mode: str = "stub") -> dict:
    """Backends keyed by metric role: clip, dino, lpips, dreamsim."""
    if mode == "stub":
        return {
            "clip": MomentEmbedder("stub-clip"),
            "dino": MomentEmbedder("stub-dino"),
            "lpips": GradientFeatureEmbedder("stub-lpips"),
            "dreamsim": MomentEmbedder("stub-dreamsim"),
        }
    if mode == "full":
        return {
            "clip": CheckpointEmbedderAdapter("clip", "embedding"),
            "dino": CheckpointEmbedderAdapter("dino-vits16", "embedding"),
            "lpips": CheckpointEmbedderAdapter("lpips-net", "features"),
            "dreamsim": CheckpointEmbedderAdapter("dreamsim", "embedding"),
        }
    raise BackendError("embedders", f"unknown embedder mode {mode!r}; use stub or full")
