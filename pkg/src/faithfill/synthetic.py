"""Synthetic shape-on-background pairs for desk-scale runs and tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import MANIFEST_NAME
from .images import BinaryMask, ImageBuffer
from .maskgen import MaskGenConfig, generate_mask
from .rng import spawn_rng

SHAPES = ("square", "disk", "cross")


def render_object(height: int, width: int, shape: str, color, background,
                  center=(0.5, 0.5), size: float = 0.4) -> ImageBuffer:
    """Flat-colored shape on a flat background."""
    canvas = np.ones((height, width, 3), dtype=np.float64) * np.asarray(background, dtype=np.float64)
    cy, cx = center[0] * height, center[1] * width
    half = size * min(height, width) / 2.0
    yy, xx = np.mgrid[0:height, 0:width]
    if shape == "square":
        inside = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
    elif shape == "disk":
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= half ** 2
    elif shape == "cross":
        arm = half / 2.5
        inside = ((np.abs(yy - cy) <= arm) & (np.abs(xx - cx) <= half)) | (
            (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= arm))
    else:
        raise ValueError(f"unknown shape {shape!r}")
    canvas[inside] = np.asarray(color, dtype=np.float64)
    return ImageBuffer(np.clip(canvas, 0.0, 1.0))


def make_synthetic_pair(object_id: str, resolution: int = 64, seed: int = 0):
    """(reference, target, target_mask) with differing pose/background."""
    rng = spawn_rng(seed, 0)
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    color = rng.uniform(0.2, 1.0, size=3)
    bg_ref = rng.uniform(0.85, 1.0, size=3)
    bg_tgt = rng.uniform(0.0, 0.2, size=3)
    ref = render_object(resolution, resolution, shape, color, bg_ref,
                        center=(0.5, 0.5), size=float(rng.uniform(0.35, 0.5)))
    tgt = render_object(resolution, resolution, shape, color, bg_tgt,
                        center=(float(rng.uniform(0.4, 0.6)), float(rng.uniform(0.4, 0.6))),
                        size=float(rng.uniform(0.35, 0.5)))
    mask = generate_mask(resolution, resolution,
                         MaskGenConfig(ratio=0.25, max_rectangles=3, seed=seed + 1))
    return ref, tgt, mask


def build_synthetic_dataset(root, n_objects: int = 3, resolution: int = 64, seed: int = 0) -> Path:
    """Write a small faithfill_pairs dataset with a manifest; returns root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n_objects):
        object_id = f"object_{i:02d}"
        ref, tgt, mask = make_synthetic_pair(object_id, resolution=resolution, seed=seed + 17 * i)
        obj_dir = root / object_id
        ref.save(obj_dir / "reference.png")
        tgt.save(obj_dir / "target.png")
        mask.save(obj_dir / "target_mask.png")
        entries.append({
            "object_id": object_id,
            "object_class": f"{SHAPES[i % len(SHAPES)]} toy",
            "reference": f"{object_id}/reference.png",
            "target": f"{object_id}/target.png",
            "target_mask": f"{object_id}/target_mask.png",
        })
    manifest = {"version": 1, "dataset_kind": "faithfill_pairs", "entries": entries}
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return root
