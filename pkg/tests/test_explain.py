"""Explanation pipeline: short-circuited coalitions, batching, overrides."""

import numpy as np
import pytest

from condshap.coalitions import full_mask
from condshap.data import Dataset
from condshap.errors import ConfigError
from condshap.estimators.base import ContributionEstimator, PreparedEstimator
from condshap.estimators.montecarlo import IndependenceEstimator, MCConfig
from condshap.explain import explain_instances
from condshap.models import LinearModel

from _reference import shapley_bruteforce


class _Recorder(PreparedEstimator):
    """Returns mask-as-value and records every (indices, masks) request."""

    def __init__(self, m):
        self.name = "recorder"
        self.m = m
        self.calls = []

    def contribute_batch(self, X, instance_indices, masks):
        for mask in masks:
            self._check_mask(int(mask))
        self.calls.append((instance_indices.copy(), masks.copy()))
        return np.broadcast_to(masks.astype(np.float64), (X.shape[0], masks.size)).copy()


class _RecorderFactory(ContributionEstimator):
    name = "recorder"

    def __init__(self, m):
        self.prepared = _Recorder(m)

    def prepare(self, dataset, model, master_seed):
        return self.prepared


def _toy(m=3, n=50, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    train = Dataset(tuple(f"x{j + 1}" for j in range(m)), X)
    model = LinearModel(beta0=0.5, beta=np.arange(1, m + 1, dtype=np.float64))
    return train, model


def test_trivial_coalitions_never_reach_estimator():
    train, model = _toy()
    factory = _RecorderFactory(train.m)
    X_star = train.X[:4]
    result = explain_instances(train, model, factory, X_star)
    seen = np.concatenate([masks for _, masks in factory.prepared.calls])
    assert 0 not in seen and full_mask(train.m) not in seen
    assert seen.size == (1 << train.m) - 2
    # short circuits hold exactly
    assert result.values[:, 0] == pytest.approx(model.predict(train.X).mean(), abs=1e-12)
    assert result.values[:, full_mask(train.m)] == pytest.approx(model.predict(X_star))


def test_phis_match_bruteforce_on_recorded_table():
    train, model = _toy(m=3)
    result = explain_instances(train, model, _RecorderFactory(3), train.X[:2])
    for i in range(2):
        expected = shapley_bruteforce(result.values[i], 3)
        assert result.phis[i] == pytest.approx(expected, abs=1e-12)
    assert result.efficiency_residuals() == pytest.approx(np.zeros(2), abs=1e-10)


def test_v_empty_override():
    train, model = _toy()
    result = explain_instances(
        train, model, _RecorderFactory(train.m), train.X[:1], v_empty=17.5
    )
    assert result.values[0, 0] == 17.5
    assert result.phi0 == 17.5


def test_explanations_expose_residuals():
    train, model = _toy()
    result = explain_instances(train, model, _RecorderFactory(train.m), train.X[:3])
    explanations = result.explanations()
    assert len(explanations) == 3
    for i, expl in enumerate(explanations):
        assert expl.phi0 == result.phi0
        assert expl.phis == pytest.approx(result.phis[i])
        assert abs(expl.efficiency_residual) < 1e-10


def test_bad_instance_shape_rejected():
    train, model = _toy()
    with pytest.raises(ConfigError):
        explain_instances(train, model, _RecorderFactory(train.m), train.X[0])
    with pytest.raises(ConfigError):
        explain_instances(train, model, _RecorderFactory(train.m), np.ones((2, train.m + 1)))


def test_jobs_do_not_change_results():
    train, model = _toy(m=4, n=120, seed=3)
    estimator = IndependenceEstimator(MCConfig(K=64))
    X_star = train.X[:7]
    serial = explain_instances(train, model, estimator, X_star, master_seed=11, jobs=1)
    threaded = explain_instances(train, model, estimator, X_star, master_seed=11, jobs=3)
    assert np.array_equal(serial.values, threaded.values)
    assert np.array_equal(serial.phis, threaded.phis)


def test_jobs_chunks_cover_all_rows():
    train, model = _toy(m=3, n=30)
    factory = _RecorderFactory(3)
    explain_instances(train, model, factory, train.X[:5], jobs=2)
    indices = np.concatenate([idx for idx, _ in factory.prepared.calls])
    assert sorted(indices.tolist()) == list(range(5))
