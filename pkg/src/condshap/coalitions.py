"""Coalitions as bitmasks over the feature set {1..M}.

Feature j (1-based) sits at bit j-1. The canonical enumeration order is
ascending mask value, so the empty set comes first and the grand coalition
last. M is hard-capped at 20: everything downstream enumerates all 2^M
coalitions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MAX_FEATURES = 20


def full_mask(m: int) -> int:
    return (1 << m) - 1


def _check_m(m: int) -> None:
    if not 1 <= m <= MAX_FEATURES:
        raise ConfigError(f"feature count must be in 1..{MAX_FEATURES}, got {m}")


@dataclass(frozen=True)
class Coalition:
    """A subset of the M features, stored as a bitmask."""

    mask: int
    m: int

    def __post_init__(self):
        _check_m(self.m)
        if self.mask < 0 or self.mask > full_mask(self.m):
            raise ConfigError(
                f"mask {self.mask:#x} has bits outside 1..{self.m}"
            )

    @property
    def size(self) -> int:
        return int(self.mask).bit_count()

    def members(self) -> tuple[int, ...]:
        """1-based feature indices in the coalition, ascending."""
        return tuple(j + 1 for j in range(self.m) if self.mask >> j & 1)

    def complement(self) -> "Coalition":
        return Coalition(full_mask(self.m) ^ self.mask, self.m)

    def __str__(self):
        return "{" + ",".join(map(str, self.members())) + "}"


def complement(mask: int, m: int) -> int:
    """Complement of a coalition mask within {1..M}."""
    _check_m(m)
    if mask < 0 or mask > full_mask(m):
        raise ConfigError(f"mask {mask:#x} has bits outside 1..{m}")
    return full_mask(m) ^ mask


def enumerate_coalitions(m: int) -> np.ndarray:
    """All 2^M coalition masks in ascending order (empty set first)."""
    _check_m(m)
    return np.arange(1 << m, dtype=np.int64)


def nontrivial_coalitions(m: int) -> np.ndarray:
    """The 2^M - 2 masks excluding the empty and grand coalitions."""
    _check_m(m)
    return np.arange(1, full_mask(m), dtype=np.int64)


def size_major_order(m: int) -> np.ndarray:
    """Nontrivial masks sorted by coalition size, then mask value.

    This is the row order of the masked-duplication layout: all singletons
    first, then all pairs, and so on up to size M-1.
    """
    masks = nontrivial_coalitions(m)
    order = np.lexsort((masks, popcounts(masks)))
    return masks[order]


def popcounts(masks: np.ndarray) -> np.ndarray:
    """Population count of each mask, vectorized."""
    masks = np.asarray(masks, dtype=np.int64)
    counts = np.zeros(masks.shape, dtype=np.int64)
    work = masks.copy()
    while np.any(work):
        counts += work & 1
        work >>= 1
    return counts


def member_indices(mask: int, m: int) -> np.ndarray:
    """0-based column indices of the features in the coalition."""
    return np.array([j for j in range(m) if mask >> j & 1], dtype=np.intp)


def indicator_vector(mask: int, m: int) -> np.ndarray:
    """0/1 vector with entry j set when feature j+1 is in the mask."""
    return np.array([(mask >> j) & 1 for j in range(m)], dtype=np.uint8)
