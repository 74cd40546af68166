"""Deterministic 64-bit seed derivation.

Every stochastic component in this package draws from a numpy Generator
seeded through ``mix64``, so that a single root seed reproduces a whole
experiment bit-for-bit.  Per-trial seeds are derived as

    seed_trial = mix64(root_seed, trial_index)

where ``mix64`` advances the root seed by ``(index + 1)`` golden-gamma
increments and applies the splitmix64 finalizer.  The construction is part
of the output contract: identical (root seed, index) pairs give identical
streams on every platform for a fixed numpy version.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(root_seed: int, index: int) -> int:
    """Derive a child seed from ``root_seed`` and a non-negative ``index``."""
    if index < 0:
        raise ValueError("index must be non-negative")
    z = (int(root_seed) + (int(index) + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def spawn_rng(root_seed: int, index: int) -> np.random.Generator:
    """A PCG64 generator seeded with ``mix64(root_seed, index)``."""
    return np.random.default_rng(mix64(root_seed, index))
