"""Deterministic, splittable RNG streams for reproducible trials."""

from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent counter-based generator keyed by (seed, *path).

    Streams with distinct keys are statistically independent and the keying is
    stable across runs, so per-trial generators can be created in any order
    (or from concurrent workers) without changing any result.
    """
    key = [int(seed), *(int(p) for p in path)]
    if any(k < 0 for k in key):
        raise ValueError(f"stream key components must be non-negative, got {key}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
