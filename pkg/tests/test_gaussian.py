import numpy as np
import pytest

from condshap.errors import ConfigError, NumericalError
from condshap.gaussian import (
    GaussianModel,
    cholesky_with_jitter,
    conditional_coefficients,
    conditional_gaussian,
    fit_gaussian,
    sample_mvn,
)

from _reference import conditional_mean_gaussian


def _ar1(m, rho):
    idx = np.arange(m)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def test_conditional_bivariate_hand_formula():
    rho = 0.7
    model = GaussianModel(mean=np.zeros(2), cov=np.array([[1, rho], [rho, 1.0]]))
    mean, cov = conditional_gaussian(model, 0b01, np.array([2.0]))
    assert mean == pytest.approx([rho * 2.0])
    assert cov[0, 0] == pytest.approx(1 - rho**2)


def test_conditional_mean_matches_reference():
    rng = np.random.default_rng(3)
    m = 5
    cov = _ar1(m, 0.6)
    mu = rng.normal(size=m)
    model = GaussianModel(mean=mu, cov=cov)
    x_star = rng.normal(size=m)
    for mask in (0b00001, 0b10101, 0b01110, 0b11110):
        members = [j for j in range(m) if mask & (1 << j)]
        mean, _ = conditional_gaussian(model, mask, x_star[members])
        ref = conditional_mean_gaussian(mu, cov, mask, x_star, m)
        out = [j for j in range(m) if not mask & (1 << j)]
        assert mean == pytest.approx(ref[out], abs=1e-12)


def test_conditional_coefficients_consistent():
    m = 4
    model = GaussianModel(mean=np.arange(m, dtype=float), cov=_ar1(m, 0.5))
    rng = np.random.default_rng(8)
    x_star = rng.normal(size=m)
    for mask in (1, 5, 14):
        idx_s, idx_b, coef, chol = conditional_coefficients(model, mask)
        mean, cov = conditional_gaussian(model, mask, x_star[idx_s])
        rebuilt = model.mean[idx_b] + coef @ (x_star[idx_s] - model.mean[idx_s])
        assert rebuilt == pytest.approx(mean, abs=1e-12)
        assert chol @ chol.T == pytest.approx(cov, abs=1e-10)


def test_conditional_variance_shrinks():
    model = GaussianModel(mean=np.zeros(3), cov=_ar1(3, 0.8))
    _, cov_one = conditional_gaussian(model, 0b001, np.array([0.0]))
    _, cov_two = conditional_gaussian(model, 0b011, np.zeros(2))
    # conditioning on more features cannot increase residual variance
    assert cov_two[-1, -1] <= cov_one[-1, -1] + 1e-12


def test_fit_gaussian_recovers_moments():
    rng = np.random.default_rng(9)
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    X = rng.multivariate_normal([1.0, -2.0], cov, size=20_000)
    model = fit_gaussian(X)
    assert model.mean == pytest.approx([1.0, -2.0], abs=0.05)
    assert model.cov == pytest.approx(cov, abs=0.08)
    assert np.array_equal(model.cov, model.cov.T)


def test_fit_gaussian_needs_two_rows():
    with pytest.raises(ConfigError):
        fit_gaussian(np.zeros((1, 3)))


def test_jitter_ladder_repairs_singular():
    a = np.ones((3, 3))  # rank 1
    chol, jitter = cholesky_with_jitter(a)
    assert jitter > 0
    assert chol @ chol.T == pytest.approx(a + jitter * np.eye(3), abs=1e-9)
    # already positive definite: no jitter spent
    _, jitter0 = cholesky_with_jitter(np.eye(3))
    assert jitter0 == 0.0


def test_jitter_ladder_gives_up():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalue -1 beyond the ladder
    with pytest.raises(NumericalError):
        cholesky_with_jitter(bad)


def test_degenerate_conditional_is_handled():
    # perfectly correlated pair: conditioning on one pins the other
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    model = GaussianModel(mean=np.zeros(2), cov=cov)
    mean, cond = conditional_gaussian(model, 0b01, np.array([1.5]))
    assert mean == pytest.approx([1.5], abs=1e-5)
    assert cond[0, 0] == pytest.approx(0.0, abs=1e-5)


def test_sample_mvn_moments():
    model = GaussianModel(mean=np.array([1.0, 2.0]), cov=np.array([[1.0, 0.5], [0.5, 2.0]]))
    draws = sample_mvn(model, 40_000, np.random.default_rng(4))
    assert draws.mean(axis=0) == pytest.approx(model.mean, abs=0.05)
    assert np.cov(draws, rowvar=False) == pytest.approx(model.cov, abs=0.1)
