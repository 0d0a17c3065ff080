"""Run configuration: defaults <- config file <- CLI flags.

The config file is a flat JSON object with a ``version`` field; unknown keys
are rejected. Every command that writes an output directory drops a fully
resolved snapshot there, which is sufficient to replay a toy run bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ValidationError
from .pipeline import FinetuneConfig, InferenceConfig, default_iterations

CONFIG_VERSION = 1
SNAPSHOT_NAME = "config.json"


@dataclass(frozen=True)
class RunConfig:
    version: int = CONFIG_VERSION
    # geometry
    resolution: int = 512
    latent_downsample: int = 1
    # masking
    mask_ratio: float = 0.5
    max_rectangles: int = 8
    # views
    n_views: int = 6
    canvas_gray: float = 0.5
    # adaptation
    lora_rank: int = 4
    text_lora_rank: int = 4  # used by the full text-encoder adapter only
    lora_scale: float = 1.0
    learning_rate: float = 5e-4
    iterations: Optional[int] = None  # resolved per dataset kind when unset
    # diffusion
    timesteps: int = 1000
    schedule: str = "linear"
    guidance_scale: float = 7.5
    sample_steps: int = 50
    hidden_channels: int = 16
    condition_dim: int = 16
    # randomness and backends
    seed: int = 0
    rng: str = "pcg64"
    backend: str = "toy"  # toy | full
    segmenter: str = "toy-threshold"
    view_backend: str = "toy-affine"
    embedders: str = "stub"
    prompt_template: str = "An image of <object_class>"

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ValidationError(f"unsupported config version {self.version}, expected {CONFIG_VERSION}")
        if self.rng != "pcg64":
            raise ValidationError(f"unsupported rng {self.rng!r}; runs are only replayable on pcg64")
        if self.backend not in ("toy", "full"):
            raise ValidationError(f"backend must be toy or full, got {self.backend!r}")

    def resolved_iterations(self, dataset_kind: str) -> int:
        return self.iterations if self.iterations is not None else default_iterations(dataset_kind)

    def finetune_config(self, dataset_kind: str) -> FinetuneConfig:
        return FinetuneConfig(
            iterations=self.resolved_iterations(dataset_kind),
            learning_rate=self.learning_rate,
            lora_rank=self.lora_rank,
            mask_ratio=self.mask_ratio,
            max_rectangles=self.max_rectangles,
            n_views=self.n_views,
            seed=self.seed,
            prompt_template=self.prompt_template,
            resolution=self.resolution,
            timesteps=self.timesteps,
            schedule=self.schedule,
            hidden_channels=self.hidden_channels,
            condition_dim=self.condition_dim,
            latent_downsample=self.latent_downsample,
            lora_scale=self.lora_scale,
        )

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(
            guidance_scale=self.guidance_scale,
            steps=self.sample_steps,
            seed=self.seed,
            timesteps=self.timesteps,
            schedule=self.schedule,
            latent_downsample=self.latent_downsample,
        )


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config file must contain a flat JSON object")
    unknown = sorted(set(raw) - _FIELD_NAMES)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def resolve_config(file_path=None, overrides: Optional[dict] = None) -> RunConfig:
    """defaults <- file <- explicit overrides (flags); later wins."""
    values: dict = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_NAMES:
            raise ValidationError(f"unknown config key: {key}")
        values[key] = val
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ValidationError(f"bad config: {exc}") from exc


def write_snapshot(config: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / SNAPSHOT_NAME
    path.write_text(json.dumps(asdict(config), indent=2, sort_keys=True), encoding="utf-8")
    return path
