"""End-to-end attribution pipeline: data + model + estimator -> Shapley values.

The pipeline owns the two contributions that never go through an estimator:
the empty coalition is the training mean of the model's predictions, and
the grand coalition is the prediction at the explained instance itself.
Everything in between comes from the chosen contribution estimator.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coalitions import full_mask, nontrivial_coalitions
from .data import Dataset
from .engine import Explanation, compute_shapley_batch
from .errors import ConfigError
from .estimators.base import ContributionEstimator
from .models import PredictiveModel


@dataclass
class ExplainResult:
    """Coalition table and attributions for a batch of instances."""

    feature_names: tuple[str, ...]
    values: np.ndarray  # (n, 2^m) complete coalition tables
    phi0: float
    phis: np.ndarray  # (n, m)

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    @property
    def m(self) -> int:
        return self.phis.shape[1]

    def efficiency_residuals(self) -> np.ndarray:
        grand = self.values[:, full_mask(self.m)]
        return grand - self.values[:, 0] - self.phis.sum(axis=1)

    def explanations(self) -> list[Explanation]:
        res = self.efficiency_residuals()
        return [
            Explanation(
                phi0=self.phi0,
                phis=self.phis[i].copy(),
                efficiency_residual=float(res[i]),
            )
            for i in range(self.n)
        ]


def explain_instances(
    train: Dataset,
    model: PredictiveModel,
    estimator: ContributionEstimator,
    X_star: np.ndarray,
    master_seed: int = 0,
    v_empty: float | None = None,
    jobs: int = 1,
) -> ExplainResult:
    """Shapley values for each row of X_star under the given estimator.

    v_empty overrides the empty-coalition value (the training mean of the
    model's predictions) when the caller knows the exact expectation, e.g.
    in analytic controls.
    """
    X_star = np.ascontiguousarray(np.asarray(X_star, dtype=np.float64))
    if X_star.ndim != 2 or X_star.shape[1] != train.m:
        raise ConfigError(
            f"instances must be 2-D with {train.m} columns, got shape {X_star.shape}"
        )
    m = train.m
    n = X_star.shape[0]
    masks = nontrivial_coalitions(m)
    prepared = estimator.prepare(train, model, master_seed)

    values = np.empty((n, 1 << m), dtype=np.float64)
    values[:, 0] = float(model.predict(train.X).mean()) if v_empty is None else float(v_empty)
    if jobs > 1 and n > 1:
        bounds = np.linspace(0, n, min(jobs, n) + 1).astype(int)
        spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

        def chunk(span):
            a, b = span
            return prepared.contribute_batch(X_star[a:b], np.arange(a, b), masks)

        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            for (a, b), block in zip(spans, pool.map(chunk, spans)):
                values[a:b, masks] = block
    else:
        values[:, masks] = prepared.contribute_batch(X_star, np.arange(n), masks)
    values[:, full_mask(m)] = model.predict(X_star)

    phis = compute_shapley_batch(values, m)
    return ExplainResult(
        feature_names=train.feature_names,
        values=values,
        phi0=float(values[0, 0]),
        phis=phis,
    )
