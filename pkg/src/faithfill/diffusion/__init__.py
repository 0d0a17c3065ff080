"""Latent-diffusion math: schedules, noising, losses, LoRA, sampling."""

from .schedule import NoiseSchedule, add_noise, build_schedule, draw_noise, schedule_fingerprint
from .codec import LatentCodec, ToyLatentCodec, mask_to_latent
from .conditioning import PromptEmbedding, embed_prompt, null_embedding
from .lora import LoraLayer, LoraWeights, apply_lora, load_lora, save_lora
from .denoiser import ConstantDenoiser, DenoiserBackend, OracleDenoiser, StableInpaintAdapter, ToyDenoiser
from .losses import inpaint_loss, text_loss
from .sampler import sample

__all__ = [
    "NoiseSchedule", "add_noise", "build_schedule", "draw_noise", "schedule_fingerprint",
    "LatentCodec", "ToyLatentCodec", "mask_to_latent",
    "PromptEmbedding", "embed_prompt", "null_embedding",
    "LoraLayer", "LoraWeights", "apply_lora", "load_lora", "save_lora",
    "ConstantDenoiser", "DenoiserBackend", "OracleDenoiser", "StableInpaintAdapter", "ToyDenoiser",
    "inpaint_loss", "text_loss",
    "sample",
]
