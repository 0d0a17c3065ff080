"""Dataset-level evaluation and table rendering.

Metrics default to full-image evaluation (outside the mask the target is
preserved, so full-image values still reflect fill quality). ``mask_only``
restricts PSNR to mask pixels and the windowed/feature metrics to the tight
mask bounding box grown to the SSIM window size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..dataset import DatasetManifest, sample_pair
from ..errors import ValidationError
from ..images import ImageBuffer
from .metrics import cosine_metric, crop_to_mask_bbox, perceptual_distance, psnr, psnr_masked, ssim

METRIC_GROUPS = (
    ("low", (("ssim", "SSIM ↑"), ("psnr", "PSNR ↑"), ("lpips", "LPIPS ↓"))),
    ("mid", (("dreamsim", "DreamSIM ↓"),)),
    ("high", (("dino", "DINO ↑"), ("clip", "CLIP ↑"))),
)
METRIC_KEYS = tuple(key for _, cols in METRIC_GROUPS for key, _ in cols)

# Published reference row, used as a rendering fixture only.
PAPER_FAITHFILL_ROW = (
    "FaithFill (Ours)",
    {"ssim": 0.66, "psnr": 20.15, "lpips": 0.25, "dreamsim": 0.11, "dino": 0.95, "clip": 0.97},
)


@dataclass(frozen=True)
class PairMetrics:
    object_id: str
    values: Dict[str, float]


@dataclass
class MetricReport:
    pairs: List[PairMetrics]
    means: Dict[str, float]
    missing: List[str]
    mask_only: bool = False
    groups: Dict[str, Tuple[str, ...]] = field(
        default_factory=lambda: {name: tuple(k for k, _ in cols) for name, cols in METRIC_GROUPS})

    def to_json(self) -> str:
        def enc(v: float):
            return "inf" if math.isinf(v) else v
        payload = {
            "mask_only": self.mask_only,
            "groups": {k: list(v) for k, v in self.groups.items()},
            "means": {k: enc(v) for k, v in self.means.items()},
            "missing": self.missing,
            "pairs": [{"object_id": p.object_id, **{k: enc(v) for k, v in p.values.items()}}
                      for p in self.pairs],
        }
        return json.dumps(payload, indent=2)


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def render_table(rows: Sequence[Tuple[str, Dict[str, float]]]) -> str:
    """Fixed-layout text table: low | mid | high groups, arrows in headers."""
    label_w = max([len("Methodology")] + [len(label) for label, _ in rows])
    col_w = {key: max(len(header), 6) for _, cols in METRIC_GROUPS for key, header in cols}

    def group_cells(fn) -> List[str]:
        return ["  ".join(fn(key, header) for key, header in cols) for _, cols in METRIC_GROUPS]

    group_line = " " * label_w + " | " + " | ".join(
        name.center(len(cells)) for (name, _), cells in zip(METRIC_GROUPS, group_cells(
            lambda key, header: header.rjust(col_w[key]))))
    header_line = "Methodology".ljust(label_w) + " | " + " | ".join(
        group_cells(lambda key, header: header.rjust(col_w[key])))
    rule = "-" * label_w + "-+-" + "-+-".join(
        "-" * len(cells) for cells in group_cells(lambda key, header: header.rjust(col_w[key])))

    lines = [group_line, header_line, rule]
    for label, values in rows:
        cells = " | ".join(group_cells(lambda key, header: _fmt(values[key]).rjust(col_w[key])))
        lines.append(label.ljust(label_w) + " | " + cells)
    return "\n".join(lines)


def evaluate_dataset(results_dir, manifest: DatasetManifest, embedders: dict,
                     mask_only: bool = False, pair_seed: int = 0) -> MetricReport:
    """Score one generated image per manifest entry against its target.

    Missing generations are listed and excluded from the means; the run
    continues.
    """
    for role in ("clip", "dino", "lpips", "dreamsim"):
        if role not in embedders:
            raise ValidationError(f"embedders dict is missing the {role!r} backend")
    results_dir = Path(results_dir)
    pairs: List[PairMetrics] = []
    missing: List[str] = []

    for entry in manifest.entries:
        gen_path = results_dir / f"{entry.object_id}.png"
        if not gen_path.is_file():
            missing.append(entry.object_id)
            continue
        record = sample_pair(manifest, entry.object_id, pair_seed)
        target = record.target
        generated = ImageBuffer.load(gen_path)
        if (generated.height, generated.width) != (target.height, target.width):
            generated = generated.resized(target.height, target.width)

        if mask_only:
            mask = record.target_mask
            a = crop_to_mask_bbox(generated, mask)
            b = crop_to_mask_bbox(target, mask)
            psnr_value = psnr_masked(generated, target, mask)
        else:
            a, b = generated, target
            psnr_value = psnr(generated, target)

        values = {
            "ssim": ssim(a, b),
            "psnr": psnr_value,
            "lpips": perceptual_distance(a, b, embedders["lpips"]),
            "dreamsim": perceptual_distance(a, b, embedders["dreamsim"]),
            "dino": cosine_metric(a, b, embedders["dino"]),
            "clip": cosine_metric(a, b, embedders["clip"]),
        }
        pairs.append(PairMetrics(object_id=entry.object_id, values=values))

    if not pairs:
        raise ValidationError("no generated images found; nothing to evaluate")
    means = {key: float(sum(p.values[key] for p in pairs)) / len(pairs) for key in METRIC_KEYS}
    return MetricReport(pairs=pairs, means=means, missing=missing, mask_only=mask_only)


def write_report(report: MetricReport, out_dir, label: str = "toy run") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    with (out_dir / "per_pair.jsonl").open("w", encoding="utf-8") as fh:
        for p in report.pairs:
            row = {"object_id": p.object_id,
                   **{k: ("inf" if math.isinf(v) else v) for k, v in p.values.items()}}
            fh.write(json.dumps(row) + "\n")
    (out_dir / "table.txt").write_text(render_table([(label, report.means)]) + "\n",
                                       encoding="utf-8")
    return out_dir
