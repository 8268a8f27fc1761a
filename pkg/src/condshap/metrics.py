"""Evaluation metrics: per-instance MAE against ground truth, and the
MSE_v proxy that scores contribution estimates without knowing the truth.

MAE^[i]  = (1/M) sum_j |phi_true_j^[i] - phi_hat_j^[i]|
MSE_v    = (1/|P*|) sum_S (1/N) sum_i (f(x^[i]) - v_hat(S, x^[i]))^2

where P* is the set of nontrivial coalitions. MSE_v needs no true Shapley
values, which is what makes it usable on real data; on simulations its
ranking of estimators tracks the MAE ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def mae(true_phis: np.ndarray, est_phis: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-instance mean absolute error and its mean over instances."""
    true_phis = np.asarray(true_phis, dtype=np.float64)
    est_phis = np.asarray(est_phis, dtype=np.float64)
    if true_phis.shape != est_phis.shape or true_phis.ndim != 2:
        raise ConfigError(
            f"phi arrays must share a (N, M) shape, got {true_phis.shape} vs {est_phis.shape}"
        )
    per_instance = np.abs(true_phis - est_phis).mean(axis=1)
    return per_instance, float(per_instance.mean())


def mse_v(f_values: np.ndarray, v_hat: np.ndarray) -> float:
    """Mean squared gap between f(x) and v-hat over nontrivial coalitions.

    `v_hat` is (N, |P*|): one column per nontrivial coalition.
    """
    f_values = np.asarray(f_values, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if v_hat.ndim != 2 or v_hat.shape[0] != f_values.shape[0]:
        raise ConfigError(
            f"v_hat must be (N, coalitions) with N={f_values.shape[0]}, got {v_hat.shape}"
        )
    if not np.isfinite(v_hat).all():
        raise ConfigError("v_hat contains non-finite entries")
    return float(((f_values[:, None] - v_hat) ** 2).mean())


def mse_v_per_coalition(f_values: np.ndarray, v_hat: np.ndarray, masks) -> dict[int, float]:
    """The per-coalition terms of MSE_v, keyed by coalition mask."""
    f_values = np.asarray(f_values, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.int64)
    if v_hat.shape[1] != masks.shape[0]:
        raise ConfigError(f"{v_hat.shape[1]} columns for {masks.shape[0]} masks")
    per = ((f_values[:, None] - v_hat) ** 2).mean(axis=0)
    return {int(mask): float(per[c]) for c, mask in enumerate(masks)}


@dataclass
class MetricReport:
    """Scores for one estimator on one experiment configuration."""

    estimator: str
    per_instance_mae: np.ndarray
    mean_mae: float
    mse_v: float
    per_coalition_mse: dict[int, float] = field(default_factory=dict)
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "per_instance_mae": [float(v) for v in self.per_instance_mae],
            "mean_mae": float(self.mean_mae),
            "mse_v": float(self.mse_v),
            "per_coalition_mse": {str(k): v for k, v in self.per_coalition_mse.items()},
            "runtime_seconds": float(self.runtime_seconds),
        }


def spearman(a, b) -> float:
    """Spearman rank correlation between two score vectors."""
    import scipy.stats

    return float(scipy.stats.spearmanr(a, b).statistic)
