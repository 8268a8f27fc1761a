"""Predictive models whose outputs get attributed to features.

A model is anything with predict(X) -> y over K x M batches, deterministic
for identical input. Built-ins: an explicit linear model, the symbolic
nonlinear response used by the simulation harness, and a thin wrapper
turning any fitted regressor into a model. Bridge-backed models live in
condshap.bridge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class PredictiveModel:
    """Interface: batched prediction over a K x M float matrix."""

    m: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.m:
            raise ConfigError(f"expected (K, {self.m}) batch, got {X.shape}")
        return X


@dataclass
class LinearModel(PredictiveModel):
    """f(x) = beta0 + beta . x"""

    beta0: float
    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.m = self.beta.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.beta0 + self._check(X) @ self.beta


def pairwise_nonlinearity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """g(a, b) = ab + ab^2 + a^2 b, the interaction used by the harness."""
    return a * b + a * b**2 + b * a**2


# Default coefficients of the nonlinear simulation response.
GAM_MORE_BETA = np.array([1.0, 0.2, -0.8, 1.0, 0.5, -0.8, 0.6, -0.7, -0.6])
GAM_MORE_GAMMA = np.array([0.8, -1.0, -2.0, 1.5])


@dataclass
class GamMoreModel(PredictiveModel):
    """Nonlinear additive response with two pairwise interaction terms.

    f(x) = beta0 + sum_j beta_j cos(x_j)
           + gamma1 g(x1, x2) + gamma2 g(x3, x4)

    over M=8 features. gamma has four entries for configuration parity with
    the coefficient vector it is usually quoted with; only the first two
    enter the response.
    """

    beta: np.ndarray = None  # type: ignore[assignment]
    gamma: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        self.beta = GAM_MORE_BETA.copy() if self.beta is None else np.asarray(self.beta, float)
        self.gamma = GAM_MORE_GAMMA.copy() if self.gamma is None else np.asarray(self.gamma, float)
        if self.beta.shape != (9,):
            raise ConfigError(f"beta must have 9 entries, got {self.beta.shape}")
        if self.gamma.shape != (4,):
            raise ConfigError(f"gamma must have 4 entries, got {self.gamma.shape}")
        self.m = 8

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        out = self.beta[0] + np.cos(X) @ self.beta[1:]
        out += self.gamma[0] * pairwise_nonlinearity(X[:, 0], X[:, 1])
        out += self.gamma[1] * pairwise_nonlinearity(X[:, 2], X[:, 3])
        return out


class RegressorModel(PredictiveModel):
    """Adapter: a fitted regressor (fit/predict on arrays) as a model."""

    def __init__(self, fitted, m: int, name: str = "regressor"):
        self._fitted = fitted
        self.m = m
        self.name = name

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self._fitted.predict(self._check(X)), dtype=np.float64)
