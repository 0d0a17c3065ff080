"""Low-rank residual adapters: W + scale * (B @ A), base W frozen.

B starts at zero so the adapted layer is exactly the base layer until the
first optimizer step. Weights serialize to a single .npz containing, per
adapted layer, arrays ``<name>.A`` (r x n) and ``<name>.B`` (n x r), plus a
JSON metadata blob with per-layer scale/rank and the noise-schedule
fingerprint the weights were trained under.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

import numpy as np
import torch

from ..errors import ValidationError

_META_KEY = "_lora_meta"


@dataclass
class LoraLayer:
    """One adapted layer: A is r x n, B is n x r."""

    A: torch.Tensor
    B: torch.Tensor
    scale: float = 1.0

    def __post_init__(self):
        self.A = torch.as_tensor(self.A, dtype=torch.float64) if not torch.is_tensor(self.A) else self.A
        self.B = torch.as_tensor(self.B, dtype=torch.float64) if not torch.is_tensor(self.B) else self.B
        if self.A.ndim != 2 or self.B.ndim != 2:
            raise ValidationError("LoRA factors must be 2-D matrices")
        if self.A.shape[0] != self.B.shape[1]:
            raise ValidationError(
                f"rank mismatch: A is {tuple(self.A.shape)}, B is {tuple(self.B.shape)}")
        if self.rank >= self.A.shape[1]:
            raise ValidationError(
                f"LoRA rank {self.rank} must be strictly smaller than layer width {self.A.shape[1]}")

    @property
    def rank(self) -> int:
        return int(self.A.shape[0])

    def delta(self) -> torch.Tensor:
        """The dense residual scale * (B @ A)."""
        return self.scale * (self.B @ self.A)


@dataclass
class LoraWeights:
    layers: Dict[str, LoraLayer] = field(default_factory=dict)
    schedule_fingerprint: str = ""

    def __len__(self) -> int:
        return len(self.layers)


def apply_lora(base_output: torch.Tensor, layer_input: torch.Tensor, layer: LoraLayer) -> torch.Tensor:
    """base_output + scale * B @ (A @ layer_input), over the leading channel dim."""
    n_in = layer_input.shape[0]
    n_out = base_output.shape[0]
    if layer.A.shape[1] != n_in:
        raise ValidationError(f"A expects input width {layer.A.shape[1]}, got {n_in}")
    if layer.B.shape[0] != n_out:
        raise ValidationError(f"B produces width {layer.B.shape[0]}, output has {n_out}")
    flat = layer_input.reshape(n_in, -1)
    residual = layer.B @ (layer.A @ flat)
    return base_output + layer.scale * residual.reshape((n_out,) + tuple(layer_input.shape[1:]))


def save_lora(weights: LoraWeights, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {}
    meta = {"schedule_fingerprint": weights.schedule_fingerprint, "layers": {}}
    for name, layer in weights.layers.items():
        arrays[f"{name}.A"] = layer.A.detach().cpu().numpy()
        arrays[f"{name}.B"] = layer.B.detach().cpu().numpy()
        meta["layers"][name] = {"rank": layer.rank, "scale": layer.scale}
    arrays[_META_KEY] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)
    return path


def load_lora(path) -> LoraWeights:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"weights file not found: {path}")
    with np.load(path) as npz:
        if _META_KEY not in npz:
            raise ValidationError(f"{path} is not a LoRA weights container")
        meta = json.loads(bytes(npz[_META_KEY]).decode("utf-8"))
        layers = {}
        for name, info in meta["layers"].items():
            layers[name] = LoraLayer(
                A=torch.from_numpy(npz[f"{name}.A"].astype(np.float64)),
                B=torch.from_numpy(npz[f"{name}.B"].astype(np.float64)),
                scale=float(info["scale"]),
            )
    return LoraWeights(layers=layers, schedule_fingerprint=meta["schedule_fingerprint"])
