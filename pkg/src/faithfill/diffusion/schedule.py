"""Noise schedules and the forward noising step.

``alphas[t-1]`` is the cumulative signal coefficient at timestep t (1-based):
the noisy latent is ``sqrt(alpha_t) * z0 + sqrt(1 - alpha_t) * eps``. The
linear schedule is built from the conventional beta ramp 1e-4 .. 0.02 and
stores the cumulative product of (1 - beta).

Alphas are allowed to touch 0.0 so the pure-noise limit of the forward step
stays expressible; builders themselves never emit an exact zero.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ValidationError
from ..rng import make_rng

BETA_START = 1e-4
BETA_END = 0.02
SCHEDULE_KINDS = ("linear", "cosine")


@dataclass(frozen=True)
class NoiseSchedule:
    alphas: np.ndarray  # cumulative signal coefficients, length T
    kind: str = "custom"

    def __post_init__(self):
        arr = np.asarray(self.alphas, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError(f"schedule must be a non-empty 1-D sequence, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("schedule contains non-finite alphas")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("alphas must lie in [0, 1]")
        if (np.diff(arr) > 1e-12).any():
            raise ValidationError("alphas must be monotonically non-increasing")
        arr.setflags(write=False)
        object.__setattr__(self, "alphas", arr)

    @property
    def T(self) -> int:
        return int(self.alphas.size)

    def alpha(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise ValidationError(f"timestep {t} out of range [1, {self.T}]")
        return float(self.alphas[t - 1])


def build_schedule(T: int, kind: str = "linear") -> NoiseSchedule:
    if T < 1:
        raise ValidationError(f"schedule length must be >= 1, got {T}")
    if kind == "linear":
        betas = np.linspace(BETA_START, BETA_END, T, dtype=np.float64)
        alphas = np.cumprod(1.0 - betas)
    elif kind == "cosine":
        s = 0.008
        t = np.arange(0, T + 1, dtype=np.float64)
        f = np.cos((t / T + s) / (1.0 + s) * math.pi / 2.0) ** 2
        alphas = np.clip(f[1:] / f[0], 1e-10, 1.0)
        alphas = np.minimum.accumulate(alphas)
    else:
        raise ValidationError(f"unknown schedule kind {kind!r}; choose from {SCHEDULE_KINDS}")
    return NoiseSchedule(alphas=alphas, kind=kind)


def schedule_fingerprint(schedule: NoiseSchedule) -> str:
    h = hashlib.sha256()
    h.update(schedule.kind.encode("utf-8"))
    h.update(str(schedule.T).encode("utf-8"))
    h.update(np.ascontiguousarray(schedule.alphas).tobytes())
    return h.hexdigest()[:16]


def _ensure_tensor(x, name: str) -> torch.Tensor:
    t = torch.as_tensor(x, dtype=torch.float64)
    if not torch.isfinite(t).all():
        raise ValidationError(f"{name} contains non-finite values")
    return t


def add_noise(z0, t: int, eps, schedule: NoiseSchedule) -> torch.Tensor:
    """Forward step: sqrt(alpha_t) * z0 + sqrt(1 - alpha_t) * eps."""
    z0_t = _ensure_tensor(z0, "z0")
    eps_t = _ensure_tensor(eps, "eps")
    if z0_t.shape != eps_t.shape:
        raise ValidationError(f"z0 shape {tuple(z0_t.shape)} != eps shape {tuple(eps_t.shape)}")
    a = schedule.alpha(t)
    return math.sqrt(a) * z0_t + math.sqrt(1.0 - a) * eps_t


def draw_noise(shape, seed: int) -> torch.Tensor:
    """Seeded standard-normal tensor (float64, PCG64 stream)."""
    arr = make_rng(seed).standard_normal(tuple(shape))
    return torch.from_numpy(arr)
