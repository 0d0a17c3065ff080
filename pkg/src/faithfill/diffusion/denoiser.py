"""Noise-prediction backends.

``ToyDenoiser`` is a small frozen conv net with LoRA-adapted square channel
mixers, FiLM-conditioned on (prompt embedding, timestep features). It is the
CI stand-in for the full inpainting U-Net: same input contract
(noisy latent, masked-image latent, mask, t, prompt), same parameter
partition (frozen base vs trainable low-rank residuals).

``OracleDenoiser`` analytically inverts the forward noising step and
``ConstantDenoiser`` replays a fixed tensor; both exist for verification.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Protocol, Tuple

import numpy as np
import torch
from torch import nn

from ..errors import BackendError, ValidationError
from ..rng import spawn_rng
from .conditioning import DEFAULT_COND_DIM, PromptEmbedding, timestep_features
from .lora import LoraLayer, LoraWeights, apply_lora
from .schedule import NoiseSchedule

TIME_DIM = 8


class DenoiserBackend(Protocol):
    name: str
    condition_dim: int

    def predict_noise(self, z_t: torch.Tensor, t: int, condition: PromptEmbedding,
                      mask_channels: Optional[Tuple[torch.Tensor, torch.Tensor]] = None) -> torch.Tensor: ...

    def lora_parameters(self) -> Iterable[torch.Tensor]: ...

    def base_parameters(self) -> Iterable[torch.Tensor]: ...


def _validate_inputs(z_t: torch.Tensor, latent_channels: int, condition: PromptEmbedding,
                     cond_dim: int, mask_channels) -> Tuple[torch.Tensor, torch.Tensor]:
    if z_t.ndim != 3 or z_t.shape[0] != latent_channels:
        raise ValidationError(f"z_t must be ({latent_channels}, h, w), got {tuple(z_t.shape)}")
    if not torch.isfinite(z_t).all():
        raise ValidationError("z_t contains non-finite values")
    if condition.dim != cond_dim:
        raise ValidationError(f"condition width {condition.dim} != denoiser width {cond_dim}")
    if mask_channels is None:
        h, w = z_t.shape[1], z_t.shape[2]
        return torch.zeros_like(z_t), torch.zeros((1, h, w), dtype=z_t.dtype)
    masked_latent, mask = mask_channels
    if masked_latent.shape != z_t.shape:
        raise ValidationError(
            f"masked latent shape {tuple(masked_latent.shape)} != z_t shape {tuple(z_t.shape)}")
    if mask.shape != (1,) + tuple(z_t.shape[1:]):
        raise ValidationError(f"latent mask must be (1, h, w), got {tuple(mask.shape)}")
    return masked_latent, mask


class ToyDenoiser(nn.Module):
    """Frozen conv denoiser with LoRA on the two square mixer layers.

    The optional control branch mirrors a frozen auxiliary conditioning
    network: an extra frozen conv path from the mask stack that nudges the
    hidden state. It is off by default in the toy configuration and is never
    trained.
    """

    name = "toy"

    def __init__(self, latent_channels: int = 4, hidden: int = 16,
                 condition_dim: int = DEFAULT_COND_DIM, lora_rank: int = 4,
                 lora_scale: float = 1.0, seed: int = 0, control_branch: bool = False):
        super().__init__()
        if lora_rank and lora_rank >= hidden:
            raise ValidationError(f"LoRA rank {lora_rank} must be < hidden width {hidden}")
        self.latent_channels = latent_channels
        self.hidden = hidden
        self.condition_dim = condition_dim
        self.lora_rank = int(lora_rank or 0)
        self.lora_scale = lora_scale
        self.seed = seed
        self.control_enabled = control_branch

        in_ch = 2 * latent_channels + 1
        self.lift = nn.Conv2d(in_ch, hidden, 3, padding=1).double()
        self.film = nn.Linear(condition_dim + TIME_DIM, 2 * hidden).double()
        self.mix1 = nn.Conv2d(hidden, hidden, 1, bias=False).double()
        self.mix2 = nn.Conv2d(hidden, hidden, 1, bias=False).double()
        self.head = nn.Conv2d(hidden, latent_channels, 3, padding=1).double()
        self.control = nn.Conv2d(latent_channels + 1, hidden, 3, padding=1).double()

        rng = spawn_rng(seed, 0)
        for module in (self.lift, self.film, self.mix1, self.mix2, self.head, self.control):
            fan_in = int(np.prod(module.weight.shape[1:]))
            w = rng.standard_normal(tuple(module.weight.shape)) * math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                module.weight.copy_(torch.from_numpy(w))
                if module.bias is not None:
                    module.bias.zero_()
        with torch.no_grad():
            self.head.weight.mul_(0.1)  # start near-zero output so loss ~ E||eps||^2
        for p in self.parameters():
            p.requires_grad_(False)

        if self.lora_rank > 0:
            lrng = spawn_rng(seed, 1)
            def init_a():
                a = lrng.standard_normal((self.lora_rank, hidden)) / math.sqrt(hidden)
                return nn.Parameter(torch.from_numpy(a))
            self.lora_A1 = init_a()
            self.lora_B1 = nn.Parameter(torch.zeros(hidden, self.lora_rank, dtype=torch.float64))
            self.lora_A2 = init_a()
            self.lora_B2 = nn.Parameter(torch.zeros(hidden, self.lora_rank, dtype=torch.float64))

    # -- parameter partition -------------------------------------------------
    def lora_parameters(self):
        if self.lora_rank == 0:
            return []
        return [self.lora_A1, self.lora_B1, self.lora_A2, self.lora_B2]

    def base_parameters(self):
        lora = {id(p) for p in self.lora_parameters()}
        return [p for p in self.parameters() if id(p) not in lora]

    def _lora_layer(self, which: int) -> Optional[LoraLayer]:
        if self.lora_rank == 0:
            return None
        if which == 1:
            return LoraLayer(A=self.lora_A1, B=self.lora_B1, scale=self.lora_scale)
        return LoraLayer(A=self.lora_A2, B=self.lora_B2, scale=self.lora_scale)

    # -- forward -------------------------------------------------------------
    def predict_noise(self, z_t: torch.Tensor, t: int, condition: PromptEmbedding,
                      mask_channels=None) -> torch.Tensor:
        masked_latent, mask = _validate_inputs(
            z_t, self.latent_channels, condition, self.condition_dim, mask_channels)
        x = torch.cat([z_t, masked_latent, mask], dim=0).unsqueeze(0)

        h = torch.nn.functional.silu(self.lift(x))
        if self.control_enabled:
            ctrl = torch.cat([masked_latent, mask], dim=0).unsqueeze(0)
            h = h + self.control(ctrl)

        cond = np.concatenate([condition.vector, timestep_features(t, TIME_DIM)])
        film = self.film(torch.from_numpy(cond))
        gamma, beta = film[: self.hidden], film[self.hidden:]
        h = h * (1.0 + gamma.view(1, -1, 1, 1)) + beta.view(1, -1, 1, 1)

        h_in = h.squeeze(0)
        h = self.mix1(h).squeeze(0)
        if self.lora_rank:
            h = apply_lora(h, h_in, self._lora_layer(1))
        h = torch.nn.functional.silu(h)

        h_in = h
        h = self.mix2(h.unsqueeze(0)).squeeze(0)
        if self.lora_rank:
            h = apply_lora(h, h_in, self._lora_layer(2))
        h = torch.nn.functional.silu(h)

        return self.head(h.unsqueeze(0)).squeeze(0)

    # -- weights artifact ----------------------------------------------------
    def export_lora(self, schedule_fingerprint: str = "") -> LoraWeights:
        layers = {}
        for idx, name in ((1, "mix1"), (2, "mix2")):
            layer = self._lora_layer(idx)
            if layer is not None:
                layers[name] = LoraLayer(A=layer.A.detach().clone(), B=layer.B.detach().clone(),
                                         scale=layer.scale)
        return LoraWeights(layers=layers, schedule_fingerprint=schedule_fingerprint)

    def load_lora(self, weights: LoraWeights) -> None:
        if self.lora_rank == 0:
            raise ValidationError("denoiser was built without LoRA capacity")
        for name, attr_a, attr_b in (("mix1", "lora_A1", "lora_B1"), ("mix2", "lora_A2", "lora_B2")):
            if name not in weights.layers:
                raise ValidationError(f"weights missing adapted layer {name!r}")
            layer = weights.layers[name]
            if tuple(layer.A.shape) != tuple(getattr(self, attr_a).shape):
                raise ValidationError(
                    f"{name}: shape {tuple(layer.A.shape)} does not fit this denoiser")
            with torch.no_grad():
                getattr(self, attr_a).copy_(layer.A)
                getattr(self, attr_b).copy_(layer.B)
            self.lora_scale = layer.scale


class ConstantDenoiser:
    """Returns a fixed tensor; lets tests pin the prediction exactly."""

    name = "constant"

    def __init__(self, output: torch.Tensor, condition_dim: int = DEFAULT_COND_DIM):
        self.output = output
        self.condition_dim = condition_dim

    def predict_noise(self, z_t, t, condition, mask_channels=None):
        if self.output.shape != z_t.shape:
            raise ValidationError(f"stored output shape {tuple(self.output.shape)} != z_t "
                                  f"shape {tuple(z_t.shape)}")
        return self.output

    def lora_parameters(self):
        return []

    def base_parameters(self):
        return []


class OracleDenoiser:
    """Recovers the exact noise when z_t was built by noising the masked latent.

    Inverts the forward step: eps = (z_t - sqrt(a_t) * masked_latent) / sqrt(1 - a_t).
    Verification backend only.
    """

    name = "oracle"

    def __init__(self, schedule: NoiseSchedule, condition_dim: int = DEFAULT_COND_DIM):
        self.schedule = schedule
        self.condition_dim = condition_dim

    def predict_noise(self, z_t, t, condition, mask_channels=None):
        if mask_channels is None:
            raise ValidationError("oracle denoiser needs the masked-latent channel")
        masked_latent, _ = mask_channels
        a = self.schedule.alpha(t)
        if a >= 1.0:
            raise ValidationError("oracle undefined at alpha == 1 (no noise present)")
        return (z_t - math.sqrt(a) * masked_latent) / math.sqrt(1.0 - a)

    def lora_parameters(self):
        return []

    def base_parameters(self):
        return []


class StableInpaintAdapter:
    """Adapter seam for the full-scale pretrained inpainting denoiser.

    Bind a callable ``(z_t, t, condition, masked_latent, mask) -> eps_hat``
    from the integration environment. The toy pipeline never instantiates it.
    """

    name = "sd-inpaint"

    def __init__(self, model: Optional[Callable] = None, checkpoint_dir: Optional[str] = None,
                 condition_dim: int = 1024):
        self.model = model
        self.checkpoint_dir = checkpoint_dir
        self.condition_dim = condition_dim

    def predict_noise(self, z_t, t, condition, mask_channels=None):
        if self.model is None:
            raise BackendError(self.name, "no pretrained denoiser bound "
                               "(set FAITHFILL_BACKEND_DIR and inject a model callable)")
        masked_latent, mask = mask_channels if mask_channels is not None else (None, None)
        out = self.model(z_t, t, condition, masked_latent, mask)
        if out.shape != z_t.shape:
            raise BackendError(self.name, f"model returned {tuple(out.shape)}, "
                               f"expected {tuple(z_t.shape)}")
        return out

    def lora_parameters(self):
        return []

    def base_parameters(self):
        return []
