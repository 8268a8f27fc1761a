"""Kernel backend selection.

Prefers the compiled Cython extension when it importable; falls back to the
NumPy implementation otherwise. Set CONDSHAP_PURE=1 to force the fallback
(useful for benchmarking and debugging).
"""

import os

from . import pure

if os.environ.get("CONDSHAP_PURE", "") == "1":
    _impl = pure
else:
    try:
        from .. import _fastkernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
popcount_table = _impl.popcount_table
shapley_aggregate = _impl.shapley_aggregate
shapley_aggregate_batch = _impl.shapley_aggregate_batch

__all__ = [
    "BACKEND",
    "popcount_table",
    "shapley_aggregate",
    "shapley_aggregate_batch",
    "pure",
]
