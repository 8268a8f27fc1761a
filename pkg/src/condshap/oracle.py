"""Ground-truth Shapley values when the features are exactly Gaussian.

For each coalition S, v(S) = E[f(x) | x_S = x*_S] is integrated by Monte
Carlo over the closed-form conditional Gaussian. Precision is controlled,
not assumed: per-coalition standard errors come from batch means over 100
groups, and the draw count doubles (bounded by max_doublings) until every
coalition meets the target SE. Coalitions whose complements have equal
size share common random numbers, and antithetic pairs are on by default.

v(empty) is the unconditional mean of f, integrated the same way; v(full)
is f(x*) exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coalitions import full_mask, nontrivial_coalitions, popcounts
from .engine import Explanation, compute_shapley_batch, weight_table
from .errors import ConfigError
from .gaussian import GaussianModel, cholesky_with_jitter, conditional_coefficients
from .models import PredictiveModel
from .rng import STAGE_ORACLE, substream

_BATCHES = 100           # batch-means groups for the SE estimate
_EVAL_ROWS = 1 << 20     # cap on rows per f-evaluation call


@dataclass(frozen=True)
class OracleConfig:
    """Precision knobs for the ground-truth computation."""

    K_oracle: int = 1_000_000
    target_se: float = 1e-3
    max_doublings: int = 4
    antithetic: bool = True

    def __post_init__(self):
        if self.K_oracle < 10_000:
            raise ConfigError("K_oracle must be at least 10^4")
        if not self.target_se > 0:
            raise ConfigError("target_se must be positive")
        if self.max_doublings < 0:
            raise ConfigError("max_doublings must be >= 0")


@dataclass
class OracleResult:
    """Ground-truth explanations plus achieved-precision diagnostics."""

    explanations: list[Explanation]
    phis: np.ndarray            # (n, M)
    phi0: float
    phi_se: np.ndarray          # (n, M) propagated from per-coalition SEs
    max_coalition_se: float
    reached_target: bool
    draws_per_coalition: int
    values: np.ndarray = field(repr=False, default=None)  # (n, 2^M) v table


def _round_up_multiple(k: int, base: int) -> int:
    return ((k + base - 1) // base) * base


class _DrawStream:
    """Sequential standard-normal draws for one (complement size, round).

    Antithetic pairs are interleaved (z, -z, z, -z, ...), so any even-sized
    prefix is self-paired and masks that share the stream see identical
    draws chunk by chunk.
    """

    def __init__(self, master_seed, b, round_index, antithetic):
        self.rng = substream(master_seed, STAGE_ORACLE, b, round_index)
        self.b = b
        self.antithetic = antithetic

    def take(self, k: int) -> np.ndarray:
        if not self.antithetic:
            return self.rng.standard_normal((k, self.b))
        z = self.rng.standard_normal((k // 2, self.b))
        out = np.empty((k, self.b))
        out[0::2] = z
        out[1::2] = -z
        return out


def _propagate_se(se_sq: np.ndarray, m: int) -> np.ndarray:
    """Per-feature SE of phi from independent per-coalition variances.

    Streams differ across complement sizes and v(full) is exact, so the
    coalition estimates are independent and variances add through the
    squared Shapley weights.
    """
    n, size = se_sq.shape
    masks = np.arange(size, dtype=np.int64)
    w = weight_table(m)
    pc = popcounts(masks)
    out = np.empty((n, m))
    for j in range(m):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        weights_sq = w[pc[without]] ** 2
        out[:, j] = np.sqrt((se_sq[:, without] + se_sq[:, without | bit]) @ weights_sq)
    return out


def true_shapley_gaussian_batch(
    f: PredictiveModel,
    X_star: np.ndarray,
    gaussian: GaussianModel,
    config: OracleConfig | None = None,
    master_seed: int = 0,
) -> OracleResult:
    """Ground-truth Shapley values for a batch of instances."""
    config = config or OracleConfig()
    X_star = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    n, m = X_star.shape
    if gaussian.m != m:
        raise ConfigError(f"instances have {m} features, Gaussian model has {gaussian.m}")

    size = 1 << m
    joint_chol, _ = cholesky_with_jitter(gaussian.regularized_cov())

    # Conditional pieces per mask; mask 0 conditions on nothing.
    cond = {0: (np.empty(0, dtype=np.intp), np.arange(m), np.empty((m, 0)), joint_chol)}
    for mask in nontrivial_coalitions(m):
        cond[int(mask)] = conditional_coefficients(gaussian, int(mask))

    open_masks = np.arange(size - 1, dtype=np.int64)  # everything but the full mask
    batch_sums = {int(mask): np.zeros((n, _BATCHES)) for mask in open_masks}
    per_batch = 0

    # Keep per-batch group sizes even so antithetic pairs never split.
    k0 = _round_up_multiple(config.K_oracle, 2 * _BATCHES)
    active = set(int(v) for v in open_masks)
    se = np.zeros((n, size))
    round_index = 0
    draws_total = 0

    while True:
        k_new = k0 if round_index == 0 else draws_total  # add as much as we have
        per_new = k_new // _BATCHES
        group = max(1, min(_BATCHES, _EVAL_ROWS // max(1, n * per_new)))
        for mask in sorted(active):
            idx_s, idx_b, coef, chol = cond[mask]
            b = idx_b.size
            stream = _DrawStream(master_seed, b, round_index, config.antithetic)
            if mask == 0:
                cond_mean = np.tile(gaussian.mean, (n, 1))
            else:
                cond_mean = gaussian.mean[idx_b] + (X_star[:, idx_s] - gaussian.mean[idx_s]) @ coef.T
            for g0 in range(0, _BATCHES, group):
                g1 = min(g0 + group, _BATCHES)
                kc = (g1 - g0) * per_new
                shift = stream.take(kc) @ chol.T       # (kc, b), instance-independent
                rows = np.repeat(X_star, kc, axis=0)
                completions = cond_mean[:, None, :] + shift[None, :, :]
                rows[:, idx_b] = completions.reshape(n * kc, b)
                preds = f.predict(rows).reshape(n, g1 - g0, per_new)
                batch_sums[mask][:, g0:g1] += preds.sum(axis=2)
        per_batch += per_new
        draws_total += k_new
        round_index += 1

        still_active = set()
        for mask in active:
            means = batch_sums[mask] / per_batch
            se_mask = means.std(axis=1, ddof=1) / np.sqrt(_BATCHES)
            se[:, mask] = se_mask
            if se_mask.max() > config.target_se:
                still_active.add(mask)
        active = still_active
        if not active or round_index > config.max_doublings:
            break

    reached = not active
    if not reached:
        worst = float(se[:, open_masks].max())
        warnings.warn(
            f"oracle SE target {config.target_se:g} not reached after "
            f"{config.max_doublings} doublings (worst {worst:.3g}); "
            "results carry the achieved SE",
            stacklevel=2,
        )

    values = np.empty((n, size))
    for mask in open_masks:
        values[:, int(mask)] = batch_sums[int(mask)].sum(axis=1) / (per_batch * _BATCHES)
    v_empty = float(values[0, 0])  # identical across instances: shared stream
    values[:, 0] = v_empty
    values[:, size - 1] = f.predict(X_star)

    phis = compute_shapley_batch(values, m)
    explanations = [
        Explanation(
            phi0=v_empty,
            phis=phis[i],
            efficiency_residual=float(
                values[i, size - 1] - v_empty - phis[i].sum()
            ),
        )
        for i in range(n)
    ]
    phi_se = _propagate_se(se**2, m)
    return OracleResult(
        explanations=explanations,
        phis=phis,
        phi0=v_empty,
        phi_se=phi_se,
        max_coalition_se=float(se[:, open_masks].max()),
        reached_target=reached,
        draws_per_coalition=draws_total,
        values=values,
    )


def true_shapley_gaussian(
    f: PredictiveModel,
    x_star: np.ndarray,
    gaussian: GaussianModel,
    config: OracleConfig | None = None,
    master_seed: int = 0,
) -> OracleResult:
    """Single-instance convenience wrapper."""
    return true_shapley_gaussian_batch(
        f, np.asarray(x_star, dtype=np.float64)[None, :], gaussian, config, master_seed
    )
