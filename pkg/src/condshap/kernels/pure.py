"""Vectorized NumPy implementation of the aggregation kernels.

Used when the compiled extension is unavailable or disabled. All functions
take a dense value vector indexed by coalition mask (length 2^M) and a
weight lookup table indexed by coalition size.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def popcount_table(m: int) -> np.ndarray:
    """Popcount of every mask 0..2^M-1 via doubling: pc(2k)=pc(k), pc(2k+1)=pc(k)+1."""
    table = np.zeros(1 << m, dtype=np.int64)
    for j in range(m):
        bit = 1 << j
        table[bit : 2 * bit] = table[:bit] + 1
    return table


def shapley_aggregate(values: np.ndarray, weights_by_size: np.ndarray, m: int) -> np.ndarray:
    """Weighted marginal-contribution sum over all coalitions.

    phi[j] = sum over masks S without j of w(|S|) * (v(S | bit_j) - v(S)).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape != (1 << m,):
        raise ValueError(f"expected {1 << m} values, got {values.shape}")
    pc = popcount_table(m)
    masks = np.arange(1 << m, dtype=np.int64)
    phi = np.empty(m, dtype=np.float64)
    for j in range(m):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        w = weights_by_size[pc[without]]
        phi[j] = np.dot(w, values[without | bit] - values[without])
    return phi


def shapley_aggregate_batch(
    values: np.ndarray, weights_by_size: np.ndarray, m: int
) -> np.ndarray:
    """Batched form: values is (n, 2^M), returns (n, M)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    n = values.shape[0]
    if values.shape != (n, 1 << m):
        raise ValueError(f"expected (n, {1 << m}) values, got {values.shape}")
    pc = popcount_table(m)
    masks = np.arange(1 << m, dtype=np.int64)
    phi = np.empty((n, m), dtype=np.float64)
    for j in range(m):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        w = weights_by_size[pc[without]]
        phi[:, j] = (values[:, without | bit] - values[:, without]) @ w
    return phi
