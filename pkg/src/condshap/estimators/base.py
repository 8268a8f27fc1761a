"""Contribution-estimator interface.

An estimator approximates v(S, x*) = E[f(x) | x_S = x*_S] for the
nontrivial coalitions. The empty and grand coalitions are short-circuited
by the explanation pipeline and must never reach an estimator.

Estimators are two-phase: `prepare(dataset, model, seed)` does all
training-data-dependent work and returns a prepared object whose state is
read-only; `contribute` / `contribute_batch` may then be called
concurrently. Randomized estimators derive one RNG substream per
(instance index, coalition mask), so results do not depend on evaluation
order or batching.
"""

from __future__ import annotations

import abc

import numpy as np

from ..coalitions import full_mask
from ..data import Dataset
from ..errors import EstimatorError
from ..models import PredictiveModel


class PreparedEstimator(abc.ABC):
    """Read-only state produced by ContributionEstimator.prepare."""

    name: str = "?"
    m: int = 0

    def _check_mask(self, mask: int) -> None:
        if mask <= 0 or mask >= full_mask(self.m):
            raise EstimatorError(
                f"estimator asked for trivial coalition mask {mask:#x}; "
                "the empty and grand coalitions are handled by the engine",
                coalition=mask,
            )

    @abc.abstractmethod
    def contribute_batch(
        self,
        X: np.ndarray,
        instance_indices: np.ndarray,
        masks: np.ndarray,
    ) -> np.ndarray:
        """v-hat for each instance (rows) and coalition mask (columns).

        X is (n, M); instance_indices are the stable per-run indices used
        for substream seeding; masks are nontrivial coalition masks.
        Returns an (n, len(masks)) float array.
        """

    def contribute(self, x: np.ndarray, instance_index: int, mask: int) -> float:
        """Single (instance, coalition) contribution estimate."""
        x = np.asarray(x, dtype=np.float64)
        out = self.contribute_batch(
            x[None, :], np.array([instance_index]), np.array([mask], dtype=np.int64)
        )
        return float(out[0, 0])


class ContributionEstimator(abc.ABC):
    """Factory half of the estimator interface."""

    name: str = "?"

    @abc.abstractmethod
    def prepare(
        self, dataset: Dataset, model: PredictiveModel, master_seed: int
    ) -> PreparedEstimator:
        """Fit or index everything the estimator needs from training data."""


def as_instance_indices(n: int, instance_indices=None) -> np.ndarray:
    if instance_indices is None:
        return np.arange(n, dtype=np.int64)
    idx = np.asarray(instance_indices, dtype=np.int64)
    if idx.shape != (n,):
        raise EstimatorError(f"expected {n} instance indices, got shape {idx.shape}")
    return idx
