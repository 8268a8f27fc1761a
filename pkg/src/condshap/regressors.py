"""Built-in regressors used by the regression estimators.

Three in-core learners with a common fit/predict surface:

* ols: least squares through a QR factorization of the design matrix;
  rank deficiency is an error pointing the user at ridge.
* ridge-basis: ridge regression on an expanded basis (raw columns, their
  cosines and squares, and pairwise products) with an unpenalized
  intercept; as lambda grows predictions shrink to the target mean.
* knn: mean target of the k nearest training rows under per-column
  standardized Euclidean distance.

Bridge-backed regressors share the surface but delegate to a sidecar
process; see condshap.bridge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError

REGRESSOR_KINDS = ("ols", "ridge-basis", "knn", "bridge")


@dataclass(frozen=True)
class RegressorSpec:
    """Which regressor to build, with its hyperparameters."""

    kind: str
    ridge_lambda: float = 1e-3
    knn_k: int = 10
    backend: str = "ols-ref"      # bridge only
    ensemble_size: int = 1        # bridge only

    def __post_init__(self):
        if self.kind not in REGRESSOR_KINDS:
            raise ConfigError(f"unknown regressor kind {self.kind!r}; expected {REGRESSOR_KINDS}")
        if self.kind == "ridge-basis" and self.ridge_lambda <= 0:
            raise ConfigError("ridge lambda must be positive")
        if self.kind == "knn" and self.knn_k < 1:
            raise ConfigError("knn k must be >= 1")
        if self.kind == "bridge" and self.ensemble_size < 1:
            raise ConfigError("ensemble size must be >= 1")


class OlsRegressor:
    """Least squares via QR. Stores intercept-augmented coefficients."""

    def __init__(self, rank_tol: float = 1e-10):
        self.rank_tol = rank_tol
        self.coef_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "OlsRegressor":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        design = np.column_stack([np.ones(X.shape[0]), X])
        q, r = np.linalg.qr(design, mode="reduced")
        diag = np.abs(np.diag(r))
        if diag.min() <= self.rank_tol * max(1.0, diag.max()):
            raise NumericalError(
                "design matrix is rank deficient; use the ridge-basis regressor"
            )
        self.coef_ = scipy.linalg.solve_triangular(r, q.T @ y)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise ConfigError("regressor is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return self.coef_[0] + X @ self.coef_[1:]


def expand_basis(X: np.ndarray) -> np.ndarray:
    """Raw columns, cos(column), column^2, and all pairwise products."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    blocks = [X, np.cos(X), X**2]
    for j in range(d):
        for k in range(j + 1, d):
            blocks.append((X[:, j] * X[:, k])[:, None])
    return np.hstack(blocks)


class RidgeBasisRegressor:
    """Ridge on the expanded basis, intercept unpenalized.

    Fitting centers the expanded features and the targets, so the
    lambda -> infinity limit is exactly the target mean.
    """

    def __init__(self, lam: float = 1e-3):
        if lam <= 0:
            raise ConfigError("ridge lambda must be positive")
        self.lam = lam
        self.coef_: np.ndarray | None = None
        self.center_: np.ndarray | None = None
        self.intercept_: float = 0.0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeBasisRegressor":
        z = expand_basis(X)
        y = np.asarray(y, dtype=np.float64)
        self.center_ = z.mean(axis=0)
        zc = z - self.center_
        self.intercept_ = float(y.mean())
        gram = zc.T @ zc + self.lam * np.eye(zc.shape[1])
        self.coef_ = scipy.linalg.solve(gram, zc.T @ (y - self.intercept_), assume_a="pos")
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise ConfigError("regressor is not fitted")
        zc = expand_basis(X) - self.center_
        return self.intercept_ + zc @ self.coef_


class KnnRegressor:
    """Mean target over the k nearest rows, standardized Euclidean.

    k clamps to the number of training rows, mirroring the neighbor-count
    convention of the kernel-weighted sampler.
    """

    def __init__(self, k: int = 10):
        if k < 1:
            raise ConfigError("knn k must be >= 1")
        self.k = k
        self.X_: np.ndarray | None = None
        self.y_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KnnRegressor":
        X = np.asarray(X, dtype=np.float64)
        self.k = min(self.k, X.shape[0])
        self.X_ = X
        self.y_ = np.asarray(y, dtype=np.float64)
        scale = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
        self.scale_ = np.where(scale > 0, scale, 1.0)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.X_ is None:
            raise ConfigError("regressor is not fitted")
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        train = self.X_ / self.scale_
        for i, x in enumerate(X / self.scale_):
            d2 = ((train - x) ** 2).sum(axis=1)
            nearest = np.argpartition(d2, self.k - 1)[: self.k]
            out[i] = self.y_[nearest].mean()
        return out


def make_regressor(spec: RegressorSpec, bridge_pool=None):
    """Instantiate the regressor described by `spec`.

    Bridge regressors need a live session pool; in-core kinds ignore it.
    """
    if spec.kind == "ols":
        return OlsRegressor()
    if spec.kind == "ridge-basis":
        return RidgeBasisRegressor(lam=spec.ridge_lambda)
    if spec.kind == "knn":
        return KnnRegressor(k=spec.knn_k)
    if spec.kind == "bridge":
        if bridge_pool is None:
            raise ConfigError("bridge regressor requires a session pool")
        from .bridge import BridgeRegressor

        return BridgeRegressor(pool=bridge_pool, backend=spec.backend, ensemble_size=spec.ensemble_size)
    raise ConfigError(f"unknown regressor kind {spec.kind!r}")
