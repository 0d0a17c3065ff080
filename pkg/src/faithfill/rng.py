"""Deterministic randomness.

Every random draw in the toolkit flows through numpy's PCG64 so results are
bit-reproducible across machines and runs. The generator name is part of the
config schema; if it ever changes, serialized run records stop replaying and
that is intentional.
"""

from __future__ import annotations

import hashlib

import numpy as np

GENERATOR_NAME = "pcg64"


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a plain integer seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent child stream for (seed, key) without consuming the parent.

    Uses SeedSequence spawn keys, which are stable across numpy versions.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def stable_seed(*parts) -> int:
    """Map arbitrary labels (strings, ints) to a stable 63-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big") >> 1
