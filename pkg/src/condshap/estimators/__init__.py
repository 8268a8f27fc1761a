"""Contribution estimators and the compact spec-string grammar.

Spec strings name an estimator in one reproducible token, e.g.::

    independence
    gaussian-mc:K=1000
    empirical:K=500:neighbors=100:bw=0.1
    separate:ols
    separate:bridge:ols-ref:ens=8
    surrogate-aug:ridge-basis:lambda=0.001:budget=50000
    surrogate-aug-coal:bridge:tabpfn-v2:ens=1
    surrogate-direct:bridge:ols-ref

Grammar: colon-separated segments — the method name, then (for regression
methods) a regressor kind, then (for bridge regressors) a backend name,
then any number of key=value options. "ols-separate" is accepted as an
alias for "separate:ols".
"""

from __future__ import annotations

from ..errors import ConfigError
from ..regressors import RegressorSpec
from .base import ContributionEstimator, PreparedEstimator
from .montecarlo import (
    EmpiricalEstimator,
    GaussianMCEstimator,
    IndependenceEstimator,
    MCConfig,
)
from .regression import (
    AugmentationPlan,
    AugmentedRow,
    SeparateRegressionEstimator,
    SurrogateEstimator,
    build_augmented_dataset,
    encode_queries,
    fit_separate,
    rows_per_coalition,
    rows_per_size,
    stack_augmented,
)

MC_METHODS = ("independence", "empirical", "gaussian-mc")
REGRESSION_METHODS = ("separate", "surrogate-direct", "surrogate-aug", "surrogate-aug-coal")
ALIASES = {"ols-separate": "separate:ols"}

_INT_KEYS = {"K", "neighbors", "k", "ens", "budget"}
_FLOAT_KEYS = {"bw", "lambda"}


def _parse_options(parts: list[str], spec_text: str) -> dict:
    options = {}
    for part in parts:
        if "=" not in part:
            raise ConfigError(f"bad estimator option {part!r} in {spec_text!r}")
        key, _, raw = part.partition("=")
        if key in _INT_KEYS:
            options[key] = int(raw)
        elif key in _FLOAT_KEYS:
            options[key] = float(raw)
        else:
            raise ConfigError(f"unknown estimator option {key!r} in {spec_text!r}")
    return options


def _mc_config(options: dict) -> MCConfig:
    kwargs = {}
    if "K" in options:
        kwargs["K"] = options.pop("K")
    if "neighbors" in options:
        kwargs["empirical_neighbors"] = options.pop("neighbors")
    if "bw" in options:
        kwargs["empirical_bandwidth"] = options.pop("bw")
    if options:
        raise ConfigError(f"unused estimator options {sorted(options)}")
    return MCConfig(**kwargs)


def _regressor_spec(parts: list[str], spec_text: str) -> tuple[RegressorSpec, list[str]]:
    if not parts:
        raise ConfigError(f"estimator {spec_text!r} needs a regressor kind")
    kind = parts[0]
    rest = parts[1:]
    kwargs = {"kind": kind}
    if kind == "bridge":
        if not rest or "=" in rest[0]:
            raise ConfigError(f"bridge regressor in {spec_text!r} needs a backend name")
        kwargs["backend"] = rest[0]
        rest = rest[1:]
    options = _parse_options(rest, spec_text)
    if "lambda" in options:
        kwargs["ridge_lambda"] = options.pop("lambda")
    if "k" in options:
        kwargs["knn_k"] = options.pop("k")
    if "ens" in options:
        kwargs["ensemble_size"] = options.pop("ens")
    return RegressorSpec(**kwargs), options


def parse_estimator_spec(spec_text: str, bridge_pool=None) -> ContributionEstimator:
    """Build an estimator from its compact spec string."""
    text = ALIASES.get(spec_text.strip(), spec_text.strip())
    if not text:
        raise ConfigError("empty estimator spec")
    parts = text.split(":")
    method, rest = parts[0], parts[1:]

    if method in MC_METHODS:
        config = _mc_config(_parse_options(rest, spec_text))
        cls = {
            "independence": IndependenceEstimator,
            "empirical": EmpiricalEstimator,
            "gaussian-mc": GaussianMCEstimator,
        }[method]
        est = cls(config)
        est.name = spec_text.strip()
        return est

    if method in REGRESSION_METHODS:
        reg_spec, options = _regressor_spec(rest, spec_text)
        if method == "separate":
            if options:
                raise ConfigError(f"unused options {sorted(options)} in {spec_text!r}")
            return SeparateRegressionEstimator(
                reg_spec, bridge_pool=bridge_pool, name=spec_text.strip()
            )
        mode = {
            "surrogate-direct": "direct",
            "surrogate-aug": "augmented",
            "surrogate-aug-coal": "augmented-size",
        }[method]
        plan = None
        if "budget" in options:
            plan_mode = "per-coalition-size" if mode == "augmented-size" else "per-coalition"
            encoding = "missing-token" if reg_spec.kind == "bridge" else "zero-plus-indicator"
            plan = AugmentationPlan(
                budget=options.pop("budget"), mode=plan_mode, mask_encoding=encoding
            )
        if options:
            raise ConfigError(f"unused options {sorted(options)} in {spec_text!r}")
        return SurrogateEstimator(
            reg_spec, mode=mode, plan=plan, bridge_pool=bridge_pool, name=spec_text.strip()
        )

    raise ConfigError(
        f"unknown estimator method {method!r}; expected one of "
        f"{MC_METHODS + REGRESSION_METHODS} or alias {sorted(ALIASES)}"
    )


__all__ = [
    "ALIASES",
    "AugmentationPlan",
    "AugmentedRow",
    "ContributionEstimator",
    "EmpiricalEstimator",
    "GaussianMCEstimator",
    "IndependenceEstimator",
    "MCConfig",
    "MC_METHODS",
    "PreparedEstimator",
    "REGRESSION_METHODS",
    "SeparateRegressionEstimator",
    "SurrogateEstimator",
    "build_augmented_dataset",
    "encode_queries",
    "fit_separate",
    "parse_estimator_spec",
    "rows_per_coalition",
    "rows_per_size",
    "stack_augmented",
]
