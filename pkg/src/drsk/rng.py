"""Seeding helpers.

All randomness flows through counter-based Philox generators keyed by a master
seed plus an integer path, so any stream can be recreated without replaying
the streams that precede it.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under master ``seed``."""
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed) -> np.random.Generator:
    """Accept either a ready generator or an integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed)
