"""Deterministic RNG substreams.

Every stochastic stage derives its generator from (master_seed, *key) via
SeedSequence, so results are independent of evaluation order and safe to
parallelize. Keys are small integers: stage tag first, then indices such
as instance index and coalition mask.
"""

from __future__ import annotations

import numpy as np

# Stage tags keep substreams for different pipeline stages disjoint.
STAGE_DATA = 1
STAGE_NOISE = 2
STAGE_ESTIMATOR = 3
STAGE_ORACLE = 4
STAGE_AUGMENT = 5
STAGE_CELL = 6


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream identified by (master_seed, *key)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(master_seed: int, *key: int) -> int:
    """Fresh integer seed for a nested stage, stable across runs."""
    return int(substream(master_seed, *key).integers(0, 1 << 63))
