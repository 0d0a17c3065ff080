"""Prompt and timestep conditioning for the toy stack.

The toy text encoder maps prompt text to a deterministic unit vector (seeded
from a stable hash of the text), standing in for a frozen CLIP text encoder:
equal prompts give equal embeddings, different prompts give uncorrelated
ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..rng import make_rng, stable_seed

DEFAULT_COND_DIM = 16


@dataclass(frozen=True)
class PromptEmbedding:
    vector: np.ndarray
    prompt_text: str = ""

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError(f"embedding must be a 1-D vector, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return int(self.vector.size)


def embed_prompt(text: str, dim: int = DEFAULT_COND_DIM) -> PromptEmbedding:
    rng = make_rng(stable_seed("prompt-embedding", text, dim))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return PromptEmbedding(vector=v, prompt_text=text)


def null_embedding(dim: int = DEFAULT_COND_DIM) -> PromptEmbedding:
    """Unconditional branch for classifier-free guidance (empty prompt)."""
    return embed_prompt("", dim)


def timestep_features(t: int, dim: int = 8) -> np.ndarray:
    """Sinusoidal features of the raw integer timestep."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / max(1, half))
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])
