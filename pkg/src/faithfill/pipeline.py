"""Finetune and inference orchestration.

Finetuning: segment the reference, synthesize views, then per iteration pick
a uniformly random view, draw a fresh mask and a uniform timestep, compute
the masked reconstruction loss and step the LoRA parameters only. Inference:
sample conditioned on (masked target latent, mask, prompt), decode, then
paste the decoded output only inside the mask so every mask==0 pixel is
bit-identical to the target.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch

from .dataset import PairRecord, render_prompt, PROMPT_TEMPLATE
from .diffusion import (
    LoraWeights, ToyDenoiser, ToyLatentCodec, build_schedule, draw_noise, embed_prompt,
    inpaint_loss, load_lora, sample, save_lora, schedule_fingerprint,
)
from .errors import PipelineError, ValidationError
from .images import BinaryMask, ImageBuffer
from .maskgen import MaskGenConfig, generate_mask
from .rng import GENERATOR_NAME, spawn_rng, stable_seed
from .viewgen import SegmenterBackend, ViewBackend, generate_views, segment_object

ITERATION_DEFAULTS = {"dreambooth_pairs": 1100, "faithfill_pairs": 1500}
WEIGHTS_FILENAME = "lora.npz"
RECORD_FILENAME = "run.json"


def default_iterations(dataset_kind: str) -> int:
    if dataset_kind not in ITERATION_DEFAULTS:
        raise ValidationError(f"no iteration default for dataset kind {dataset_kind!r}")
    return ITERATION_DEFAULTS[dataset_kind]


@dataclass(frozen=True)
class FinetuneConfig:
    iterations: int = ITERATION_DEFAULTS["faithfill_pairs"]
    learning_rate: float = 5e-4
    lora_rank: int = 4
    mask_ratio: float = 0.5
    max_rectangles: int = 8
    n_views: int = 6
    seed: int = 0
    prompt_template: str = PROMPT_TEMPLATE
    resolution: int = 512
    timesteps: int = 1000
    schedule: str = "linear"
    hidden_channels: int = 16
    condition_dim: int = 16
    latent_downsample: int = 1
    lora_scale: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if self.n_views < 1:
            raise ValidationError(f"n_views must be >= 1, got {self.n_views}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.resolution < 8:
            raise ValidationError(f"resolution must be >= 8, got {self.resolution}")


@dataclass(frozen=True)
class InferenceConfig:
    guidance_scale: float = 7.5
    steps: int = 50
    seed: int = 0
    timesteps: int = 1000
    schedule: str = "linear"
    latent_downsample: int = 1

    def __post_init__(self):
        if self.guidance_scale < 0:
            raise ValidationError(f"guidance scale must be >= 0, got {self.guidance_scale}")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")


@dataclass
class PipelineBackends:
    segmenter: SegmenterBackend
    view_synth: ViewBackend
    denoiser: ToyDenoiser
    codec: ToyLatentCodec = field(default_factory=ToyLatentCodec)


@dataclass
class RunRecord:
    """Everything needed to replay a finetune run bit-identically."""

    config: dict
    weights: LoraWeights
    loss_trace: List[float]
    provenance: dict
    wall_clock: float

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_lora(self.weights, out_dir / WEIGHTS_FILENAME)
        payload = {
            "config": self.config,
            "loss_trace": self.loss_trace,
            "provenance": self.provenance,
            "wall_clock": self.wall_clock,
            "weights_file": WEIGHTS_FILENAME,
        }
        (out_dir / RECORD_FILENAME).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        return out_dir

    @classmethod
    def load(cls, out_dir) -> "RunRecord":
        out_dir = Path(out_dir)
        payload = json.loads((out_dir / RECORD_FILENAME).read_text(encoding="utf-8"))
        weights = load_lora(out_dir / payload["weights_file"])
        return cls(config=payload["config"], weights=weights, loss_trace=payload["loss_trace"],
                   provenance=payload["provenance"], wall_clock=payload["wall_clock"])


def _iteration_rng(seed: int, iteration: int):
    return spawn_rng(seed, 100, iteration)


def finetune(pair: PairRecord, config: FinetuneConfig, backends: PipelineBackends) -> RunRecord:
    """View-augmented LoRA finetune on a single reference image."""
    start = time.time()
    res = config.resolution
    reference = pair.reference.resized(res, res)
    prompt = pair.prompt or render_prompt(pair.object_class, config.prompt_template)

    try:
        cutout = segment_object(reference, None, backends.segmenter)
    except Exception as exc:
        raise PipelineError("segment", str(exc)) from exc
    try:
        views = generate_views(cutout, config.n_views, backends.view_synth)
    except Exception as exc:
        raise PipelineError("viewgen", str(exc)) from exc

    schedule = build_schedule(config.timesteps, config.schedule)
    denoiser = backends.denoiser
    condition = embed_prompt(prompt, denoiser.condition_dim)
    lora_params = list(denoiser.lora_parameters())
    if not lora_params:
        raise PipelineError("setup", "denoiser has no LoRA parameters to train")
    # momentum-free adaptive first-order optimizer
    optimizer = torch.optim.RMSprop(lora_params, lr=config.learning_rate, momentum=0.0)

    trace: List[float] = []
    for i in range(config.iterations):
        rng = _iteration_rng(config.seed, i)
        view_idx = int(rng.integers(len(views)))
        t = int(rng.integers(1, schedule.T + 1))
        mask_seed = int(rng.integers(2 ** 31))
        noise_seed = int(rng.integers(2 ** 31))
        view = views.views[view_idx]
        mask = generate_mask(view.height, view.width,
                             MaskGenConfig(ratio=config.mask_ratio,
                                           max_rectangles=config.max_rectangles, seed=mask_seed))
        try:
            optimizer.zero_grad()
            loss = inpaint_loss(view, mask, t, condition, denoiser, schedule,
                                noise_seed, backends.codec)
        except Exception as exc:
            raise PipelineError("loss", str(exc), iteration=i) from exc
        value = float(loss.detach())
        if math.isnan(value) or math.isinf(value):
            raise PipelineError("loss", f"non-finite loss {value}", iteration=i)
        loss.backward()
        optimizer.step()
        trace.append(value)

    weights = denoiser.export_lora(schedule_fingerprint(schedule))
    provenance = {
        "generator": GENERATOR_NAME,
        "seed": config.seed,
        "prompt": prompt,
        "resolution": res,
        "segmenter": getattr(backends.segmenter, "name", "?"),
        "view_backend": views.backend,
        "views": list(views.provenance),
        "training_corpus": "generated views only (view 1 is the original cutout)",
        "iteration_rng": "pcg64 spawn key (seed, 100, iteration)",
        "denoiser": getattr(denoiser, "name", "?"),
    }
    return RunRecord(config=asdict(config), weights=weights, loss_trace=trace,
                     provenance=provenance, wall_clock=time.time() - start)


def inpaint(target: ImageBuffer, mask: BinaryMask, weights: LoraWeights, prompt: str,
            config: InferenceConfig, denoiser: ToyDenoiser,
            codec: Optional[ToyLatentCodec] = None) -> ImageBuffer:
    """Fill mask==1 regions; mask==0 pixels are returned bit-identical."""
    if (mask.height, mask.width) != (target.height, target.width):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match target {target.height}x{target.width}")
    mask.assert_fill_convention()
    codec = codec if codec is not None else ToyLatentCodec(config.latent_downsample)

    schedule = build_schedule(config.timesteps, config.schedule)
    fingerprint = schedule_fingerprint(schedule)
    if weights.schedule_fingerprint and weights.schedule_fingerprint != fingerprint:
        raise ValidationError(
            f"weights were trained under schedule {weights.schedule_fingerprint}, "
            f"inference config builds {fingerprint}")
    denoiser.load_lora(weights)

    masked = target.data * (1.0 - mask.data)[:, :, None]
    z_masked = codec.encode_array(masked)
    latent_mask = codec.mask_to_latent(mask)
    condition = embed_prompt(prompt, denoiser.condition_dim)
    z_T = draw_noise(tuple(z_masked.shape), stable_seed("inference-init", config.seed))
    z_hat = sample(z_T, condition, (z_masked, latent_mask), denoiser, schedule,
                   guidance_scale=config.guidance_scale, steps=config.steps, seed=config.seed)
    decoded = codec.decode(z_hat)

    fill = mask.data[:, :, None].astype(bool)
    out = np.where(fill, decoded.data, target.data)
    return ImageBuffer(out)


def occlusion_edit(target: ImageBuffer, occluder_mask: BinaryMask, weights: LoraWeights,
                   prompt: str, config: InferenceConfig, denoiser: ToyDenoiser,
                   codec: Optional[ToyLatentCodec] = None) -> ImageBuffer:
    """Remove an occluder by inpainting its region; same contract as inpaint.

    With a mask covering the whole object this hallucinates it from the
    finetuned prior; pose fidelity is not guaranteed in that regime.
    """
    return inpaint(target, occluder_mask, weights, prompt, config, denoiser, codec)
