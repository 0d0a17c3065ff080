"""Reference/target pair datasets: on-disk format, validation, sampling.

Two layouts share one manifest file ``<root>/manifest`` (flat JSON):

* ``faithfill_pairs`` entries name a fixed reference/target/target_mask
  triple per object: ``<root>/<object_id>/{reference,target,target_mask}.png``.
* ``dreambooth_pairs`` entries name >=2 casual images per object; reference
  and target roles are assigned by the seeded sampler and the evaluation
  mask is generated deterministically from the sampling seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ValidationError
from .images import BinaryMask, ImageBuffer
from .maskgen import MaskGenConfig, generate_mask
from .rng import make_rng, stable_seed

MANIFEST_NAME = "manifest"
PROMPT_TEMPLATE = "An image of <object_class>"
DATASET_KINDS = ("faithfill_pairs", "dreambooth_pairs")


def render_prompt(object_class: str, template: str = PROMPT_TEMPLATE) -> str:
    return template.replace("<object_class>", object_class)


@dataclass(frozen=True)
class ManifestEntry:
    """Paths only; pixels are loaded by sample_pair."""

    object_id: str
    object_class: str
    reference: Optional[str] = None
    target: Optional[str] = None
    target_mask: Optional[str] = None
    images: Optional[tuple] = None
    prompt: Optional[str] = None


@dataclass(frozen=True)
class DatasetManifest:
    root_path: Path
    dataset_kind: str
    entries: tuple
    by_id: Dict[str, ManifestEntry] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "by_id", {e.object_id: e for e in self.entries})

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PairRecord:
    object_id: str
    object_class: str
    reference: ImageBuffer
    target: ImageBuffer
    target_mask: BinaryMask
    prompt: str

    def __post_init__(self):
        if (self.target_mask.height, self.target_mask.width) != (self.target.height, self.target.width):
            raise ValidationError(
                f"{self.object_id}: mask {self.target_mask.height}x{self.target_mask.width} "
                f"does not match target {self.target.height}x{self.target.width}"
            )


def _decode_entry(raw: dict, index: int) -> ManifestEntry:
    if "object_id" not in raw or "object_class" not in raw:
        raise ValidationError(f"entry #{index}: object_id and object_class are required")
    images = raw.get("images")
    return ManifestEntry(
        object_id=str(raw["object_id"]),
        object_class=str(raw["object_class"]),
        reference=raw.get("reference"),
        target=raw.get("target"),
        target_mask=raw.get("target_mask"),
        images=tuple(images) if images is not None else None,
        prompt=raw.get("prompt"),
    )


def _check_image(root: Path, rel: Optional[str], entry_id: str, role: str, problems: List[str]):
    if rel is None:
        problems.append(f"{entry_id}: missing {role} path")
        return None
    path = root / rel
    if not path.is_file():
        problems.append(f"{entry_id}: {role} file not found: {path}")
        return None
    try:
        return ImageBuffer.load(path)
    except Exception as exc:  # noqa: BLE001 - decode failures become validation lines
        problems.append(f"{entry_id}: {role} failed to decode: {exc}")
        return None


def validate_root(root_path) -> List[str]:
    """All validation problems for a dataset root, one string per problem."""
    root = Path(root_path)
    problems: List[str] = []
    if not root.is_dir():
        return [f"dataset root is not a directory: {root}"]
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        return [f"manifest descriptor not found: {manifest_path}"]
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return [f"manifest is not valid JSON: {exc}"]

    kind = raw.get("dataset_kind")
    if kind not in DATASET_KINDS:
        problems.append(f"dataset_kind must be one of {DATASET_KINDS}, got {kind!r}")
        return problems

    entries_raw = raw.get("entries", [])
    if not entries_raw:
        problems.append("no entries found")
        return problems

    seen = set()
    for i, e in enumerate(entries_raw):
        try:
            entry = _decode_entry(e, i)
        except ValidationError as exc:
            problems.append(str(exc))
            continue
        if entry.object_id in seen:
            problems.append(f"duplicate object_id: {entry.object_id}")
            continue
        seen.add(entry.object_id)

        if kind == "faithfill_pairs":
            target = _check_image(root, entry.target, entry.object_id, "target", problems)
            _check_image(root, entry.reference, entry.object_id, "reference", problems)
            if entry.target_mask is None:
                problems.append(f"{entry.object_id}: missing target_mask path")
            else:
                mpath = root / entry.target_mask
                if not mpath.is_file():
                    problems.append(f"{entry.object_id}: target_mask file not found: {mpath}")
                else:
                    try:
                        mask = BinaryMask.load(mpath)
                    except Exception as exc:  # noqa: BLE001
                        problems.append(f"{entry.object_id}: target_mask failed to decode: {exc}")
                        mask = None
                    if mask is not None and target is not None and \
                            (mask.height, mask.width) != (target.height, target.width):
                        problems.append(
                            f"{entry.object_id}: mask {mask.height}x{mask.width} does not match "
                            f"target {target.height}x{target.width}"
                        )
        else:
            if not entry.images or len(entry.images) < 2:
                problems.append(f"{entry.object_id}: dreambooth_pairs entries need >= 2 images")
            else:
                for rel in entry.images:
                    _check_image(root, rel, entry.object_id, "image", problems)
    return problems


def load_manifest(root_path) -> DatasetManifest:
    """Load and fully validate; entries ordered lexicographically by id."""
    problems = validate_root(root_path)
    if problems:
        raise ValidationError("; ".join(problems))
    root = Path(root_path)
    raw = json.loads((root / MANIFEST_NAME).read_text(encoding="utf-8"))
    entries = sorted(
        (_decode_entry(e, i) for i, e in enumerate(raw["entries"])),
        key=lambda e: e.object_id,
    )
    return DatasetManifest(root_path=root, dataset_kind=raw["dataset_kind"], entries=tuple(entries))


def sample_pair(manifest: DatasetManifest, object_id: str, seed: int) -> PairRecord:
    """Pure function of (manifest, object_id, seed)."""
    entry = manifest.by_id.get(object_id)
    if entry is None:
        raise ValidationError(f"unknown object_id: {object_id!r}")
    prompt = entry.prompt if entry.prompt is not None else render_prompt(entry.object_class)
    root = manifest.root_path

    if manifest.dataset_kind == "faithfill_pairs":
        reference = ImageBuffer.load(root / entry.reference)
        target = ImageBuffer.load(root / entry.target)
        mask = BinaryMask.load(root / entry.target_mask)
        return PairRecord(object_id, entry.object_class, reference, target, mask, prompt)

    # dreambooth_pairs: seeded role assignment over the object's image list
    if not entry.images or len(entry.images) < 2:
        raise ValidationError(f"{object_id}: needs >= 2 images to sample a pair")
    rng = make_rng(seed)
    idx = rng.choice(len(entry.images), size=2, replace=False)
    ref_rel, tgt_rel = entry.images[int(idx[0])], entry.images[int(idx[1])]
    reference = ImageBuffer.load(root / ref_rel)
    target = ImageBuffer.load(root / tgt_rel)
    mask_seed = stable_seed("dreambooth-eval-mask", object_id, seed)
    mask = generate_mask(target.height, target.width, MaskGenConfig(ratio=0.5, seed=mask_seed))
    return PairRecord(object_id, entry.object_class, reference, target, mask, prompt)
