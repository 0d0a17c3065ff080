"""Ancestral denoising sampler with classifier-free guidance.

The sampler walks a descending, evenly respaced subsequence of timesteps.
At each step the guided prediction is

    eps = eps_uncond + guidance_scale * (eps_cond - eps_uncond)

and the state moves to the posterior mean of the previous selected timestep
plus seeded ancestral noise; the final step returns the predicted clean
latent directly, so a perfect noise prediction recovers z0 exactly.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np
import torch

from ..errors import ValidationError
from .conditioning import PromptEmbedding, null_embedding
from .denoiser import DenoiserBackend
from .schedule import NoiseSchedule, draw_noise
from ..rng import stable_seed


def respaced_timesteps(T: int, steps: int) -> list:
    """Descending unique timesteps from T down to 1, `steps` of them at most."""
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    ts = np.unique(np.round(np.linspace(T, 1, min(steps, T))).astype(int))[::-1]
    return [int(t) for t in ts]


def sample(z_start: torch.Tensor, condition: PromptEmbedding,
           mask_inputs: Optional[Tuple[torch.Tensor, torch.Tensor]],
           denoiser: DenoiserBackend, schedule: NoiseSchedule,
           guidance_scale: float = 7.5, steps: int = 50, seed: int = 0,
           uncond: Optional[PromptEmbedding] = None) -> torch.Tensor:
    """Iteratively denoise z_start to a clean latent; deterministic in seed."""
    if guidance_scale < 0:
        raise ValidationError(f"guidance scale must be >= 0, got {guidance_scale}")
    if uncond is None:
        uncond = null_embedding(denoiser.condition_dim)

    timesteps = respaced_timesteps(schedule.T, steps)
    z = z_start
    for i, t in enumerate(timesteps):
        a_t = schedule.alpha(t)
        if a_t <= 0.0:
            raise ValidationError(f"cannot invert the forward step at alpha == 0 (t={t})")
        with torch.no_grad():
            eps_u = denoiser.predict_noise(z, t, uncond, mask_inputs)
            eps_c = denoiser.predict_noise(z, t, condition, mask_inputs)
        eps = eps_u + guidance_scale * (eps_c - eps_u)

        z0_hat = (z - math.sqrt(1.0 - a_t) * eps) / math.sqrt(a_t)
        last = i == len(timesteps) - 1
        if last:
            z = z0_hat
            break

        a_prev = schedule.alpha(timesteps[i + 1])
        alpha_step = a_t / a_prev
        beta_step = 1.0 - alpha_step
        mean = (math.sqrt(a_prev) * beta_step / (1.0 - a_t)) * z0_hat \
            + (math.sqrt(alpha_step) * (1.0 - a_prev) / (1.0 - a_t)) * z
        var = beta_step * (1.0 - a_prev) / (1.0 - a_t)
        noise = draw_noise(tuple(z.shape), stable_seed("ancestral", seed, i))
        z = mean + math.sqrt(max(0.0, var)) * noise
    return z
