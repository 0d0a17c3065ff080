"""Training objectives.

``text_loss`` is the mean squared residual between predicted and true noise
(mean reduction keeps the magnitude resolution-independent). ``inpaint_loss``
is the masked variant: the view is multiplied by the inverted mask (1 marks
the fill region, so the fill region is zeroed), encoded, noised with seeded
Gaussian noise, and the denoiser predicts that noise from
(noisy latent, masked latent, mask, t, prompt). Gradients reach only the
denoiser's LoRA parameters; pixels, noise and base weights carry no grad.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ValidationError
from ..images import BinaryMask, ImageBuffer
from .codec import ToyLatentCodec
from .conditioning import PromptEmbedding
from .denoiser import DenoiserBackend
from .schedule import NoiseSchedule, add_noise, draw_noise


def text_loss(pred_eps: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean squared noise-prediction residual (scalar tensor, grad-capable)."""
    if pred_eps.shape != eps.shape:
        raise ValidationError(
            f"prediction shape {tuple(pred_eps.shape)} != noise shape {tuple(eps.shape)}")
    diff = pred_eps - eps
    return (diff * diff).mean()


def masked_pixels(view: ImageBuffer, mask: BinaryMask) -> np.ndarray:
    """x * (1 - m): zero out the region to fill, keep the region to skip."""
    if (mask.height, mask.width) != (view.height, view.width):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match view {view.height}x{view.width}")
    return view.data * (1.0 - mask.data)[:, :, None]


def inpaint_loss(view: ImageBuffer, mask: BinaryMask, t: int, condition: PromptEmbedding,
                 denoiser: DenoiserBackend, schedule: NoiseSchedule, rng_seed: int,
                 codec: ToyLatentCodec | None = None) -> torch.Tensor:
    """Masked reconstruction objective for one view; deterministic in rng_seed.

    The noise target is exactly ``draw_noise(latent_shape, rng_seed)``.
    """
    codec = codec if codec is not None else ToyLatentCodec()
    pixels = masked_pixels(view, mask)
    z0 = codec.encode_array(pixels)
    latent_mask = codec.mask_to_latent(mask)
    eps = draw_noise(z0.shape, rng_seed)
    z_t = add_noise(z0, t, eps, schedule)
    pred = denoiser.predict_noise(z_t, t, condition, (z0, latent_mask))
    return text_loss(pred, eps)
