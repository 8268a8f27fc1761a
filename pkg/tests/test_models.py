import math

import numpy as np
import pytest

from condshap.errors import ConfigError
from condshap.models import (
    GAM_MORE_BETA,
    GAM_MORE_GAMMA,
    GamMoreModel,
    LinearModel,
    PredictiveModel,
    RegressorModel,
)


def test_linear_model():
    f = LinearModel(2.0, np.array([1.0, -0.5]))
    X = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert f.predict(X) == pytest.approx([2.0, 2.0])
    assert f.m == 2


def test_linear_rejects_wrong_width():
    f = LinearModel(0.0, np.ones(3))
    with pytest.raises(ConfigError):
        f.predict(np.zeros((2, 2)))


def test_gam_more_value_by_hand():
    beta = np.asarray(GAM_MORE_BETA)
    gamma = np.asarray(GAM_MORE_GAMMA)
    f = GamMoreModel()
    x = np.array([0.3, -1.2, 0.8, 0.0, 1.1, -0.4, 2.0, 0.5])
    # additive part: beta0 + sum beta_j cos(x_j)
    expected = beta[0] + sum(beta[j + 1] * math.cos(x[j]) for j in range(8))
    # two pairwise terms on (x1,x2) and (x3,x4), g(a,b) = ab + ab^2 + a^2 b
    def g(a, b):
        return a * b + a * b * b + a * a * b

    expected += gamma[0] * g(x[0], x[1]) + gamma[1] * g(x[2], x[3])
    assert f.predict(x[None, :])[0] == pytest.approx(expected, rel=1e-12)


def test_gam_more_defaults():
    assert len(GAM_MORE_BETA) == 9
    assert len(GAM_MORE_GAMMA) == 4
    f = GamMoreModel()
    assert f.m == 8


def test_gam_more_rejects_bad_shapes():
    with pytest.raises(ConfigError):
        GamMoreModel(beta=np.ones(3))
    with pytest.raises(ConfigError):
        GamMoreModel(gamma=np.ones(2))


def test_regressor_model_wraps_fitted():
    class Doubler:
        def predict(self, X):
            return 2.0 * X[:, 0]

    f = RegressorModel(Doubler(), m=2, name="doubler")
    assert f.predict(np.array([[3.0, 0.0]])) == pytest.approx([6.0])
    assert isinstance(f, PredictiveModel)
