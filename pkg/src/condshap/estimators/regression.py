"""Regression-based contribution estimators.

Two families:

* separate: one regressor per nontrivial coalition S, trained on the
  S-columns of the training data against f(x) targets; v-hat(S, x*) is
  g_S(x*_S).
* surrogate: a single regressor (or one per coalition size) over masked
  inputs. "direct" masks at prediction time only; "augmented" trains on a
  masked-and-duplicated dataset built under a global row budget;
  "augmented-size" trains one such model per coalition size.

Masking encodings:

* zero-plus-indicator: width 2M — feature values (centered on the
  training mean, masked entries set to exactly 0) followed by M binary
  indicators where 1 marks a masked feature.
* missing-token: width M — raw values with NaN at masked entries, for
  regressors with native missing-value support (bridge backends only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..coalitions import (
    complement,
    full_mask,
    indicator_vector,
    member_indices,
    nontrivial_coalitions,
    popcounts,
    size_major_order,
)
from ..data import Dataset
from ..errors import ConfigError, EstimatorError
from ..models import PredictiveModel
from ..rng import STAGE_AUGMENT, substream
from ..regressors import RegressorSpec, make_regressor
from .base import ContributionEstimator, PreparedEstimator

ENCODINGS = ("zero-plus-indicator", "missing-token")
SURROGATE_MODES = ("direct", "augmented", "augmented-size")


def rows_per_coalition(budget: int, m: int) -> int:
    """Rows sampled per coalition when one model covers all of them."""
    return budget // ((1 << m) - 2)


def rows_per_size(budget: int, m: int, s: int) -> int:
    """Rows sampled per coalition when one model covers a single size."""
    if not 1 <= s <= m - 1:
        raise ConfigError(f"coalition size must be in 1..{m - 1}, got {s}")
    return budget // math.comb(m, s)


@dataclass(frozen=True)
class AugmentationPlan:
    """Row budget and masking layout for the augmented surrogate modes."""

    budget: int = 50_000
    mode: str = "per-coalition"
    mask_encoding: str = "zero-plus-indicator"

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("augmentation budget must be >= 1")
        if self.mode not in ("per-coalition", "per-coalition-size"):
            raise ConfigError(f"unknown augmentation mode {self.mode!r}")
        if self.mask_encoding not in ENCODINGS:
            raise ConfigError(f"unknown mask encoding {self.mask_encoding!r}")

    def rows_for(self, m: int, mask: int) -> int:
        if self.mode == "per-coalition":
            return rows_per_coalition(self.budget, m)
        return rows_per_size(self.budget, m, int(mask).bit_count())


@dataclass(frozen=True)
class AugmentedRow:
    """One masked training row: values, mask indicators, f target.

    indicators[j] == 1 exactly when values[j] is masked (0 under
    zero-plus-indicator, NaN under missing-token).
    """

    values: np.ndarray
    indicators: np.ndarray
    target: float


def build_augmented_dataset(
    X: np.ndarray,
    f_targets: np.ndarray,
    plan: AugmentationPlan,
    masks,
    master_seed: int = 0,
) -> list[AugmentedRow]:
    """Masked-and-duplicated rows for the given coalition scope.

    For each coalition, a per-coalition RNG substream draws the plan's row
    count uniformly with replacement from the training rows, so output is
    independent of coalition processing order. Values are used as given;
    any centering is the caller's responsibility.
    """
    X = np.asarray(X, dtype=np.float64)
    f_targets = np.asarray(f_targets, dtype=np.float64)
    n, m = X.shape
    masks = np.asarray(masks, dtype=np.int64)
    if masks.size == 0:
        raise ConfigError("empty coalition scope for augmentation")
    rows: list[AugmentedRow] = []
    for mask in masks:
        mask = int(mask)
        if mask <= 0 or mask >= full_mask(m):
            raise ConfigError(f"augmentation scope contains trivial mask {mask:#x}")
        budget_rows = plan.rows_for(m, mask)
        if budget_rows < 1:
            raise ConfigError(
                f"budget {plan.budget} gives 0 rows per coalition at M={m}; increase it"
            )
        rng = substream(master_seed, STAGE_AUGMENT, mask)
        picks = rng.integers(0, n, size=budget_rows)
        idx_bar = member_indices(complement(mask, m), m)
        ind = indicator_vector(complement(mask, m), m)
        masked_value = 0.0 if plan.mask_encoding == "zero-plus-indicator" else np.nan
        for i in picks:
            values = X[i].copy()
            values[idx_bar] = masked_value
            rows.append(AugmentedRow(values=values, indicators=ind, target=float(f_targets[i])))
    return rows


def stack_augmented(rows: list[AugmentedRow], encoding: str) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix and target vector for fitting a surrogate."""
    values = np.array([r.values for r in rows])
    targets = np.array([r.target for r in rows])
    if encoding == "zero-plus-indicator":
        indicators = np.array([r.indicators for r in rows], dtype=np.float64)
        return np.hstack([values, indicators]), targets
    return values, targets


def encode_queries(X: np.ndarray, mask: int, m: int, encoding: str, center=None) -> np.ndarray:
    """Encode prediction-time queries for coalition `mask`."""
    X = np.asarray(X, dtype=np.float64).copy()
    if center is not None:
        X -= center
    idx_bar = member_indices(complement(mask, m), m)
    if encoding == "zero-plus-indicator":
        X[:, idx_bar] = 0.0
        ind = np.tile(indicator_vector(complement(mask, m), m).astype(np.float64), (X.shape[0], 1))
        return np.hstack([X, ind])
    X[:, idx_bar] = np.nan
    return X


def fit_separate(spec: RegressorSpec, X: np.ndarray, f_targets: np.ndarray, masks) -> dict:
    """One fitted regressor per coalition, keyed by mask.

    Training order is ascending mask value; a fit failure aborts with the
    offending coalition named.
    """
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[1]
    models = {}
    for mask in np.asarray(masks, dtype=np.int64):
        mask = int(mask)
        idx_s = member_indices(mask, m)
        reg = make_regressor(spec)
        try:
            reg.fit(X[:, idx_s], f_targets)
        except Exception as exc:
            raise EstimatorError(
                f"regressor fit failed: {exc}", coalition=mask
            ) from exc
        models[mask] = reg
    return models


class _PreparedSeparate(PreparedEstimator):
    def __init__(self, name, m, models):
        self.name = name
        self.m = m
        self.models = models

    def contribute_batch(self, X, instance_indices, masks):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], len(masks)))
        for c, mask in enumerate(np.asarray(masks, dtype=np.int64)):
            mask = int(mask)
            self._check_mask(mask)
            if mask not in self.models:
                raise EstimatorError("no fitted model for coalition", coalition=mask)
            idx_s = member_indices(mask, self.m)
            out[:, c] = self.models[mask].predict(X[:, idx_s])
        return out


class _PreparedSeparateBridge(PreparedEstimator):
    """Bridge-backed separate mode: fit, predict, release per coalition.

    Sidecars cap their live-model count, so holding 2^M - 2 remote models
    at once is not an option; each coalition's context is registered just
    before prediction and released right after.
    """

    def __init__(self, name, m, spec, pool, X_train, f_targets):
        self.name = name
        self.m = m
        self.spec = spec
        self.pool = pool
        self.X_train = X_train
        self.f_targets = f_targets

    def contribute_batch(self, X, instance_indices, masks):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], len(masks)))
        for c, mask in enumerate(np.asarray(masks, dtype=np.int64)):
            mask = int(mask)
            self._check_mask(mask)
            idx_s = member_indices(mask, self.m)
            reg = make_regressor(self.spec, bridge_pool=self.pool)
            try:
                reg.fit(self.X_train[:, idx_s], self.f_targets)
                out[:, c] = reg.predict(X[:, idx_s])
            except EstimatorError:
                raise
            except Exception as exc:
                raise EstimatorError(
                    f"bridge regression failed: {exc}", coalition=mask
                ) from exc
            finally:
                reg.close()
        return out


class SeparateRegressionEstimator(ContributionEstimator):
    """Fits one regressor per coalition on the coalition's columns."""

    def __init__(self, spec: RegressorSpec, bridge_pool=None, name=None):
        self.spec = spec
        self.bridge_pool = bridge_pool
        self.name = name or f"separate:{spec.kind}"

    def prepare(self, dataset: Dataset, model: PredictiveModel, master_seed: int):
        f_targets = model.predict(dataset.X)
        m = dataset.X.shape[1]
        if self.spec.kind == "bridge":
            return _PreparedSeparateBridge(
                self.name, m, self.spec, self.bridge_pool, dataset.X, f_targets
            )
        models = fit_separate(self.spec, dataset.X, f_targets, nontrivial_coalitions(m))
        return _PreparedSeparate(self.name, m, models)


class _PreparedSurrogate(PreparedEstimator):
    def __init__(self, name, m, mode, encoding, center, single=None, by_size=None, direct=None):
        self.name = name
        self.m = m
        self.mode = mode
        self.encoding = encoding
        self.center = center
        self.single = single
        self.by_size = by_size or {}
        self.direct = direct

    def _handle_for(self, mask: int):
        if self.mode == "direct":
            return self.direct
        if self.mode == "augmented":
            return self.single
        size = int(mask).bit_count()
        if size not in self.by_size:
            raise EstimatorError(f"no surrogate for coalition size {size}", coalition=mask)
        return self.by_size[size]

    def contribute_batch(self, X, instance_indices, masks):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], len(masks)))
        for c, mask in enumerate(np.asarray(masks, dtype=np.int64)):
            mask = int(mask)
            self._check_mask(mask)
            encoded = encode_queries(X, mask, self.m, self.encoding, self.center)
            try:
                out[:, c] = self._handle_for(mask).predict(encoded)
            except EstimatorError:
                raise
            except Exception as exc:
                raise EstimatorError(
                    f"surrogate prediction failed: {exc}", coalition=mask
                ) from exc
        return out


class SurrogateEstimator(ContributionEstimator):
    """Single-model (or per-size) contribution estimation over masked inputs."""

    def __init__(
        self,
        spec: RegressorSpec,
        mode: str = "augmented",
        plan: AugmentationPlan | None = None,
        bridge_pool=None,
        name=None,
    ):
        if mode not in SURROGATE_MODES:
            raise ConfigError(f"unknown surrogate mode {mode!r}; expected {SURROGATE_MODES}")
        self.spec = spec
        self.mode = mode
        self.bridge_pool = bridge_pool
        if plan is None:
            default_mode = "per-coalition-size" if mode == "augmented-size" else "per-coalition"
            encoding = "missing-token" if spec.kind == "bridge" else "zero-plus-indicator"
            plan = AugmentationPlan(mode=default_mode, mask_encoding=encoding)
        self.plan = plan
        self.name = name or f"surrogate-{mode}:{spec.kind}"
        if spec.kind != "bridge":
            if mode == "direct":
                raise ConfigError(
                    "direct surrogate mode needs native missing-value support; "
                    "use a bridge regressor"
                )
            if plan.mask_encoding == "missing-token":
                raise ConfigError("in-core regressors only support zero-plus-indicator")
        if mode == "augmented" and plan.mode != "per-coalition":
            raise ConfigError("augmented mode pairs with the per-coalition budget")
        if mode == "augmented-size" and plan.mode != "per-coalition-size":
            raise ConfigError("augmented-size mode pairs with the per-coalition-size budget")

    def _make(self):
        return make_regressor(self.spec, bridge_pool=self.bridge_pool)

    def prepare(self, dataset: Dataset, model: PredictiveModel, master_seed: int):
        X = dataset.X
        m = X.shape[1]
        f_targets = model.predict(X)
        encoding = self.plan.mask_encoding
        center = X.mean(axis=0) if encoding == "zero-plus-indicator" else None

        if self.mode == "direct":
            reg = self._make()
            reg.fit(X, f_targets)
            return _PreparedSurrogate(self.name, m, self.mode, "missing-token", None, direct=reg)

        X_fit = X - center if center is not None else X
        if self.mode == "augmented":
            rows = build_augmented_dataset(
                X_fit, f_targets, self.plan, size_major_order(m), master_seed
            )
            design, targets = stack_augmented(rows, encoding)
            reg = self._make()
            reg.fit(design, targets)
            return _PreparedSurrogate(self.name, m, self.mode, encoding, center, single=reg)

        by_size = {}
        all_masks = size_major_order(m)
        sizes = popcounts(all_masks)
        for s in range(1, m):
            scope = all_masks[sizes == s]
            rows = build_augmented_dataset(X_fit, f_targets, self.plan, scope, master_seed)
            design, targets = stack_augmented(rows, encoding)
            reg = self._make()
            try:
                reg.fit(design, targets)
            except Exception as exc:
                raise EstimatorError(
                    f"surrogate fit failed for coalition size {s}: {exc}"
                ) from exc
            by_size[s] = reg
        return _PreparedSurrogate(self.name, m, self.mode, encoding, center, by_size=by_size)
