"""Monte Carlo contribution estimators.

All three share the same skeleton: draw K completions of the unobserved
columns, splice them into copies of x*, and average f over the completed
rows.

* independence: completions are uniform draws of training rows.
* empirical: completions are drawn from the nearest training rows, with
  Gaussian kernel weights on the standardized distance computed over the
  observed columns.
* gaussian: completions are exact draws from the conditional Gaussian
  fitted to (or supplied for) the training data.

Each (instance, coalition) pair owns an RNG substream, so estimates are
reproducible bitwise regardless of batch layout or evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coalitions import complement, member_indices
from ..data import Dataset
from ..errors import ConfigError, EstimatorError
from ..gaussian import GaussianModel, conditional_coefficients, fit_gaussian
from ..models import PredictiveModel
from ..rng import STAGE_ESTIMATOR, substream
from .base import ContributionEstimator, PreparedEstimator

# Cap on rows per f-evaluation call; instances are grouped to stay under it.
_PREDICT_CHUNK = 262_144


@dataclass(frozen=True)
class MCConfig:
    """Sampling configuration shared by the Monte Carlo estimators."""

    K: int = 1000
    empirical_neighbors: int = 100
    empirical_bandwidth: float = 0.1

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.empirical_neighbors < 1:
            raise ConfigError("empirical_neighbors must be >= 1")
        if not self.empirical_bandwidth > 0:
            raise ConfigError("empirical_bandwidth must be positive")


class _PreparedMC(PreparedEstimator):
    """Common batch loop: subclasses supply the completion sampler."""

    def __init__(self, name, model, X_train, config, master_seed):
        self.name = name
        self.model = model
        self.X_train = X_train
        self.m = X_train.shape[1]
        self.config = config
        self.master_seed = master_seed
        self._last_se = None

    def _draw(self, mask, idx_bar, x, rng) -> np.ndarray:
        """K x |Sbar| completions for one instance. Overridden."""
        raise NotImplementedError

    def contribute_batch(self, X, instance_indices, masks):
        values, _ = self.contribute_batch_se(X, instance_indices, masks)
        return values

    def contribute_batch_se(self, X, instance_indices, masks):
        """Estimates and their per-cell Monte Carlo standard errors.

        The SE is std(f draws, ddof=1)/sqrt(K): each cell is an iid-sample
        mean under the prepared sampling distribution.
        """
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        instance_indices = np.asarray(instance_indices, dtype=np.int64)
        K = self.config.K
        values = np.empty((n, len(masks)))
        ses = np.empty((n, len(masks)))
        group = max(1, min(n, _PREDICT_CHUNK // K))
        for c, mask in enumerate(np.asarray(masks, dtype=np.int64)):
            self._check_mask(int(mask))
            idx_bar = member_indices(complement(int(mask), self.m), self.m)
            for start in range(0, n, group):
                stop = min(start + group, n)
                block = np.repeat(X[start:stop], K, axis=0)
                for row, i in enumerate(range(start, stop)):
                    rng = substream(
                        self.master_seed, STAGE_ESTIMATOR, int(instance_indices[i]), int(mask)
                    )
                    block[row * K : (row + 1) * K, idx_bar] = self._draw(
                        int(mask), idx_bar, X[i], rng
                    )
                preds = self.model.predict(block).reshape(stop - start, K)
                values[start:stop, c] = preds.mean(axis=1)
                if K > 1:
                    ses[start:stop, c] = preds.std(axis=1, ddof=1) / np.sqrt(K)
                else:
                    ses[start:stop, c] = 0.0
        return values, ses


class _PreparedIndependence(_PreparedMC):
    def _draw(self, mask, idx_bar, x, rng):
        rows = rng.integers(0, self.X_train.shape[0], size=self.config.K)
        return self.X_train[np.ix_(rows, idx_bar)]


class _PreparedEmpirical(_PreparedMC):
    def __init__(self, *args):
        super().__init__(*args)
        scale = self.X_train.std(axis=0, ddof=1) if self.X_train.shape[0] > 1 else None
        if scale is None:
            scale = np.ones(self.m)
        self.scale = np.where(scale > 0, scale, 1.0)
        # Neighborhood cannot exceed the training set.
        self.neighbors = min(self.config.empirical_neighbors, self.X_train.shape[0])

    def _draw(self, mask, idx_bar, x, rng):
        idx_s = member_indices(mask, self.m)
        diff = (self.X_train[:, idx_s] - x[idx_s]) / self.scale[idx_s]
        d2 = np.einsum("ij,ij->i", diff, diff)
        if not np.isfinite(d2).all():
            raise EstimatorError("non-finite distances in empirical sampler", coalition=mask)
        nearest = np.argpartition(d2, self.neighbors - 1)[: self.neighbors]
        # Shift by the minimum before exponentiating so the largest weight
        # is exactly 1 and tiny bandwidths cannot underflow to all-zeros.
        d2n = d2[nearest]
        w = np.exp(-(d2n - d2n.min()) / (2.0 * self.config.empirical_bandwidth**2))
        rows = rng.choice(nearest, size=self.config.K, replace=True, p=w / w.sum())
        return self.X_train[np.ix_(rows, idx_bar)]


class _PreparedGaussianMC(_PreparedMC):
    def __init__(self, name, model, X_train, config, master_seed, gaussian):
        super().__init__(name, model, X_train, config, master_seed)
        self.gaussian = gaussian
        # mask -> (idx_s, idx_b, coef, chol). Filled lazily; entries are
        # deterministic, so a concurrent duplicate fill is harmless.
        self._cond = {}

    def _conditional(self, mask):
        if mask not in self._cond:
            self._cond[mask] = conditional_coefficients(self.gaussian, mask)
        return self._cond[mask]

    def _draw(self, mask, idx_bar, x, rng):
        idx_s, idx_b, coef, chol = self._conditional(mask)
        mean = self.gaussian.mean[idx_b] + coef @ (x[idx_s] - self.gaussian.mean[idx_s])
        z = rng.standard_normal((self.config.K, idx_b.size))
        return mean + z @ chol.T


class IndependenceEstimator(ContributionEstimator):
    """Completes x_Sbar with uniform training rows (features independent)."""

    name = "independence"

    def __init__(self, config: MCConfig | None = None):
        self.config = config or MCConfig()

    def prepare(self, dataset: Dataset, model: PredictiveModel, master_seed: int):
        return _PreparedIndependence(self.name, model, dataset.X, self.config, master_seed)


class EmpiricalEstimator(ContributionEstimator):
    """Completes x_Sbar from kernel-weighted nearest training rows."""

    name = "empirical"

    def __init__(self, config: MCConfig | None = None):
        self.config = config or MCConfig()

    def prepare(self, dataset: Dataset, model: PredictiveModel, master_seed: int):
        return _PreparedEmpirical(self.name, model, dataset.X, self.config, master_seed)


class GaussianMCEstimator(ContributionEstimator):
    """Samples x_Sbar | x_S from a fitted (or given) Gaussian model."""

    name = "gaussian-mc"

    def __init__(self, config: MCConfig | None = None, gaussian: GaussianModel | None = None):
        self.config = config or MCConfig()
        self.gaussian = gaussian

    def prepare(self, dataset: Dataset, model: PredictiveModel, master_seed: int):
        gaussian = self.gaussian if self.gaussian is not None else fit_gaussian(dataset.X)
        if gaussian.m != dataset.X.shape[1]:
            raise ConfigError(
                f"gaussian model has {gaussian.m} features, data has {dataset.X.shape[1]}"
            )
        prepared = _PreparedGaussianMC(
            self.name, model, dataset.X, self.config, master_seed, gaussian
        )
        return prepared
