"""Multivariate Gaussian model with closed-form conditionals.

Covariance factorizations go through a jitter ladder: Cholesky is attempted
on Sigma + jitter*I with jitter escalating by decades from 0 up to 1e-6.
Conditional moments are solved with the Cholesky factor of Sigma_SS; the
covariance matrix is never inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .coalitions import member_indices
from .errors import ConfigError, NumericalError

JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
SYMMETRY_TOL = 1e-12


def cholesky_with_jitter(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a + jitter*I, escalating jitter as needed."""
    a = np.asarray(a, dtype=np.float64)
    for jitter in JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
            return chol, jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky failed even at jitter {JITTER_LADDER[-1]:g}; matrix is not PSD"
    )


@dataclass(frozen=True)
class GaussianModel:
    """Mean vector and covariance matrix, with the jitter that made the
    covariance factorizable."""

    mean: np.ndarray
    cov: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ConfigError(f"cov shape {cov.shape} does not match mean {mean.shape}")
        if np.abs(cov - cov.T).max() > SYMMETRY_TOL * max(1.0, np.abs(cov).max()):
            raise ConfigError("covariance is not symmetric")

    @property
    def m(self) -> int:
        return self.mean.shape[0]

    def regularized_cov(self) -> np.ndarray:
        return self.cov + self.jitter * np.eye(self.m)


def fit_gaussian(X: np.ndarray) -> GaussianModel:
    """Column means and sample covariance (denominator N-1) of the rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ConfigError(f"need at least 2 rows to fit a Gaussian, got shape {X.shape}")
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    _, jitter = cholesky_with_jitter(cov)
    return GaussianModel(mean=mean, cov=cov, jitter=jitter)


def conditional_gaussian(
    model: GaussianModel, coalition_mask: int, x_s: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Moments of x_Sbar given x_S = x_s.

    mean = mu_Sbar + Sigma_bs Sigma_ss^{-1} (x_s - mu_S)
    cov  = Sigma_bb - Sigma_bs Sigma_ss^{-1} Sigma_sb
    """
    m = model.m
    idx_s = member_indices(coalition_mask, m)
    if idx_s.size == 0 or idx_s.size == m:
        raise ConfigError("conditioning coalition must be nonempty and proper")
    x_s = np.asarray(x_s, dtype=np.float64)
    if x_s.shape != (idx_s.size,):
        raise ConfigError(f"expected {idx_s.size} conditioning values, got {x_s.shape}")
    idx_b = np.setdiff1d(np.arange(m), idx_s)

    sigma = model.regularized_cov()
    s_ss = sigma[np.ix_(idx_s, idx_s)]
    s_bs = sigma[np.ix_(idx_b, idx_s)]
    s_bb = sigma[np.ix_(idx_b, idx_b)]
    try:
        factor = scipy.linalg.cho_factor(s_ss, lower=True)
    except scipy.linalg.LinAlgError:
        raise NumericalError(
            f"conditioning block for mask {coalition_mask:#x} is singular beyond jitter"
        ) from None
    # B = Sigma_bs Sigma_ss^{-1}, via two triangular solves.
    coef = scipy.linalg.cho_solve(factor, s_bs.T).T
    mean = model.mean[idx_b] + coef @ (x_s - model.mean[idx_s])
    cov = s_bb - coef @ s_bs.T
    cov = (cov + cov.T) / 2.0
    return mean, cov


def conditional_coefficients(
    model: GaussianModel, coalition_mask: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Instance-independent pieces of the conditional distribution.

    Returns (idx_s, idx_b, coef, chol) where the conditional mean for an
    instance is mu_b + coef @ (x_s - mu_s) and chol is the lower Cholesky
    factor of the conditional covariance (jitter ladder applied).
    """
    m = model.m
    idx_s = member_indices(coalition_mask, m)
    idx_b = np.setdiff1d(np.arange(m), idx_s)
    sigma = model.regularized_cov()
    s_ss = sigma[np.ix_(idx_s, idx_s)]
    s_bs = sigma[np.ix_(idx_b, idx_s)]
    s_bb = sigma[np.ix_(idx_b, idx_b)]
    try:
        factor = scipy.linalg.cho_factor(s_ss, lower=True)
    except scipy.linalg.LinAlgError:
        raise NumericalError(
            f"conditioning block for mask {coalition_mask:#x} is singular beyond jitter"
        ) from None
    coef = scipy.linalg.cho_solve(factor, s_bs.T).T
    cov = s_bb - coef @ s_bs.T
    chol, _ = cholesky_with_jitter((cov + cov.T) / 2.0)
    return idx_s, idx_b, coef, chol


def sample_mvn(model: GaussianModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from the joint distribution via Cholesky."""
    chol, _ = cholesky_with_jitter(model.cov)
    z = rng.standard_normal((size, model.m))
    return model.mean + z @ chol.T
