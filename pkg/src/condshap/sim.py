"""Synthetic-data experiment harness.

Data: x ~ N_M(0, Sigma) with AR(1)-style covariance Sigma_ij = rho^|i-j|;
response y = f(x) + N(0, noise_sd^2) with the nonlinear cosine-plus-
interactions f over M=8 features. The experiment loop runs a grid of
(rho, estimator) cells against ground truth from the Gaussian oracle and
scores each cell with MAE and MSE_v.

All randomness is keyed off one master seed through named substreams, so
a re-run reproduces every CSV byte for byte. Wall-clock timings therefore
live in the run manifest, never in the CSVs.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coalitions import full_mask, nontrivial_coalitions
from .data import Dataset
from .engine import compute_shapley_batch
from .errors import CondshapError, ConfigError
from .estimators import GaussianMCEstimator, parse_estimator_spec
from .gaussian import GaussianModel
from .metrics import MetricReport, mae, mse_v, mse_v_per_coalition
from .models import (
    GAM_MORE_BETA,
    GAM_MORE_GAMMA,
    GamMoreModel,
    LinearModel,
    PredictiveModel,
    RegressorModel,
)
from .oracle import OracleConfig, true_shapley_gaussian_batch
from .rng import STAGE_CELL, STAGE_DATA, STAGE_NOISE, derive_seed, substream

DEFAULT_RHO_GRID = (0.0, 0.3, 0.5, 0.9)
DEFAULT_ESTIMATORS = ("independence", "gaussian-mc", "ols-separate")


@dataclass(frozen=True)
class SimConfig:
    """One data-generation configuration."""

    m: int = 8
    rho: float = 0.0
    n_train: int = 1000
    n_test: int = 250
    noise_sd: float = 1.0
    beta: tuple = tuple(GAM_MORE_BETA)
    gamma: tuple = tuple(GAM_MORE_GAMMA)
    seed: int = 0
    stream: int = 0  # separates data streams sharing one master seed

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"rho must be in [0, 1), got {self.rho}")
        if len(self.beta) != self.m + 1:
            raise ConfigError(f"beta needs {self.m + 1} entries, got {len(self.beta)}")
        if len(self.gamma) != 4:
            raise ConfigError(f"gamma needs 4 entries, got {len(self.gamma)}")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")

    def covariance(self) -> np.ndarray:
        return ar1_covariance(self.m, self.rho)

    def true_gaussian(self) -> GaussianModel:
        return GaussianModel(mean=np.zeros(self.m), cov=self.covariance())


def ar1_covariance(m: int, rho: float) -> np.ndarray:
    """Sigma_ij = rho^|i-j| (identity at rho=0)."""
    idx = np.arange(m)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(np.float64)


def gen_mvn_data(config: SimConfig) -> tuple[Dataset, Dataset]:
    """Train/test datasets of i.i.d. N(0, Sigma) rows, via Cholesky."""
    chol = np.linalg.cholesky(config.covariance())
    rng = substream(config.seed, STAGE_DATA, config.stream)
    z = rng.standard_normal((config.n_train + config.n_test, config.m))
    X = z @ chol.T
    names = tuple(f"x{j + 1}" for j in range(config.m))
    return (
        Dataset(names, X[: config.n_train]),
        Dataset(names, X[config.n_train :]),
    )


def make_response(dataset: Dataset, config: SimConfig) -> np.ndarray:
    """y = f(x) + N(0, noise_sd^2) under the nonlinear response."""
    f = GamMoreModel(beta=np.asarray(config.beta), gamma=np.asarray(config.gamma))
    rng = substream(config.seed, STAGE_NOISE, config.stream)
    noise = rng.normal(0.0, config.noise_sd, size=dataset.n) if config.noise_sd > 0 else 0.0
    return f.predict(dataset.X) + noise


def build_model(
    spec_text: str, config: SimConfig, train: Dataset, bridge_pool=None
) -> PredictiveModel:
    """Predictive model named by the config: symbolic or fitted on train."""
    text = spec_text.strip()
    if text == "gam-more":
        if config.m != 8:
            raise ConfigError("the gam-more response is defined for M=8")
        return GamMoreModel(beta=np.asarray(config.beta), gamma=np.asarray(config.gamma))
    if text.startswith("linear:"):
        coeffs = [float(v) for v in text[len("linear:") :].split(",")]
        if len(coeffs) != config.m + 1:
            raise ConfigError(f"linear model needs {config.m + 1} coefficients")
        return LinearModel(coeffs[0], np.asarray(coeffs[1:]))
    if text.startswith(("ridge-basis", "ols", "knn", "bridge:")):
        if config.m != 8:
            raise ConfigError("fitted models in simulations require the M=8 response")
        y = make_response(train, config)
        return fit_model_from_spec(text, train.X, y, bridge_pool)
    raise ConfigError(f"unknown model spec {spec_text!r}")


def fit_model_from_spec(text: str, X: np.ndarray, y: np.ndarray, bridge_pool=None):
    """Fit a learner named by a compact spec string to (X, y)."""
    from .regressors import KnnRegressor, OlsRegressor, RidgeBasisRegressor

    parts = text.split(":")
    kind, rest = parts[0], parts[1:]
    options = {}
    backend = None
    if kind == "bridge":
        if not rest:
            raise ConfigError("bridge model spec needs a backend name")
        backend, rest = rest[0], rest[1:]
    for part in rest:
        key, _, raw = part.partition("=")
        if not raw:
            raise ConfigError(f"bad model option {part!r}")
        options[key] = raw
    m = X.shape[1]
    if kind == "ols":
        fitted = OlsRegressor().fit(X, y)
    elif kind == "ridge-basis":
        fitted = RidgeBasisRegressor(lam=float(options.pop("lambda", 1e-3))).fit(X, y)
    elif kind == "knn":
        fitted = KnnRegressor(k=int(options.pop("k", 10))).fit(X, y)
    elif kind == "bridge":
        from .bridge import BridgeRegressor

        if bridge_pool is None:
            raise ConfigError("bridge model requires a sidecar (--bridge or CONDSHAP_BRIDGE_CMD)")
        fitted = BridgeRegressor(
            bridge_pool, backend, ensemble_size=int(options.pop("ens", 1))
        ).fit(X, y)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    if options:
        raise ConfigError(f"unused model options {sorted(options)}")
    return RegressorModel(fitted, m, name=text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment: rho grid x estimator list, plus oracle settings."""

    seed: int = 0
    rho_grid: tuple = DEFAULT_RHO_GRID
    estimators: tuple = DEFAULT_ESTIMATORS
    model: str = "gam-more"
    sim: SimConfig = field(default_factory=SimConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    use_true_gaussian: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.rho_grid:
            raise ConfigError("rho grid is empty")
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass
class CellResult:
    estimator: str
    rho: float
    report: MetricReport | None = None
    error: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list[CellResult]
    oracle_max_se: dict[float, float]
    stage_runtimes: dict[str, float]

    def report_for(self, estimator: str, rho: float) -> MetricReport:
        for cell in self.cells:
            if cell.estimator == estimator and cell.rho == rho:
                if cell.report is None:
                    raise KeyError(f"cell ({estimator}, {rho}) failed: {cell.error}")
                return cell.report
        raise KeyError(f"no cell for ({estimator}, {rho})")


def _run_cell(
    spec_text: str,
    est_index: int,
    rho_index: int,
    config: ExperimentConfig,
    sim: SimConfig,
    train: Dataset,
    test: Dataset,
    model: PredictiveModel,
    true_phis: np.ndarray,
    bridge_pool,
) -> MetricReport:
    cell_seed = derive_seed(config.seed, STAGE_CELL, rho_index, est_index + 1)
    estimator = parse_estimator_spec(spec_text, bridge_pool=bridge_pool)
    if config.use_true_gaussian and isinstance(estimator, GaussianMCEstimator):
        estimator.gaussian = sim.true_gaussian()
    t0 = time.perf_counter()
    prepared = estimator.prepare(train, model, cell_seed)
    masks = nontrivial_coalitions(sim.m)
    v_hat = prepared.contribute_batch(test.X, np.arange(test.n), masks)

    values = np.empty((test.n, 1 << sim.m))
    values[:, 0] = float(model.predict(train.X).mean())
    values[:, masks] = v_hat
    values[:, full_mask(sim.m)] = model.predict(test.X)
    phis = compute_shapley_batch(values, sim.m)
    runtime = time.perf_counter() - t0

    per_instance, mean_mae = mae(true_phis, phis)
    f_test = model.predict(test.X)
    return MetricReport(
        estimator=spec_text,
        per_instance_mae=per_instance,
        mean_mae=mean_mae,
        mse_v=mse_v(f_test, v_hat),
        per_coalition_mse=mse_v_per_coalition(f_test, v_hat, masks),
        runtime_seconds=runtime,
    )


def run_experiment(config: ExperimentConfig, bridge_pool=None) -> ExperimentResult:
    """Oracle-scored comparison of estimators over the rho grid.

    A failing estimator is recorded in its cell and the run continues.
    """
    cells: list[CellResult] = []
    oracle_max_se: dict[float, float] = {}
    runtimes: dict[str, float] = {}

    for rho_index, rho in enumerate(config.rho_grid):
        sim = replace(config.sim, rho=float(rho), seed=config.seed, stream=rho_index)
        t0 = time.perf_counter()
        train, test = gen_mvn_data(sim)
        model = build_model(config.model, sim, train, bridge_pool)
        runtimes[f"data[rho={rho!r}]"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        oracle_seed = derive_seed(config.seed, STAGE_CELL, rho_index, 0)
        oracle = true_shapley_gaussian_batch(
            model, test.X, sim.true_gaussian(), config.oracle, master_seed=oracle_seed
        )
        oracle_max_se[float(rho)] = oracle.max_coalition_se
        runtimes[f"oracle[rho={rho!r}]"] = time.perf_counter() - t0

        def cell(args):
            est_index, spec_text = args
            try:
                report = _run_cell(
                    spec_text, est_index, rho_index, config, sim,
                    train, test, model, oracle.phis, bridge_pool,
                )
                return CellResult(estimator=spec_text, rho=float(rho), report=report)
            except CondshapError as exc:
                return CellResult(estimator=spec_text, rho=float(rho), error=str(exc))

        t0 = time.perf_counter()
        jobs = list(enumerate(config.estimators))
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(cell, jobs))
        else:
            results = [cell(job) for job in jobs]
        cells.extend(results)
        runtimes[f"estimators[rho={rho!r}]"] = time.perf_counter() - t0

    return ExperimentResult(
        config=config, cells=cells, oracle_max_se=oracle_max_se, stage_runtimes=runtimes
    )


def parse_experiment_toml(text: str) -> ExperimentConfig:
    """Experiment config from a TOML document.

    Recognized tables: [experiment] (seed, rho, estimators, model,
    use_true_gaussian, jobs), [sim] (m, n_train, n_test, noise_sd, beta,
    gamma), [oracle] (draws, target_se, max_doublings, antithetic).
    Unknown keys are rejected so typos cannot silently change a run.
    """
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML config: {exc}") from None

    def take(table: dict, key: str, default):
        return table.pop(key, default)

    exp = dict(doc.pop("experiment", {}))
    simt = dict(doc.pop("sim", {}))
    orat = dict(doc.pop("oracle", {}))
    if doc:
        raise ConfigError(f"unknown config tables {sorted(doc)}")

    m = int(take(simt, "m", 8))
    default_beta = tuple(GAM_MORE_BETA) if m == 8 else (0.0,) * (m + 1)
    default_gamma = tuple(GAM_MORE_GAMMA)
    sim = SimConfig(
        m=m,
        n_train=int(take(simt, "n_train", 1000)),
        n_test=int(take(simt, "n_test", 250)),
        noise_sd=float(take(simt, "noise_sd", 1.0)),
        beta=tuple(float(b) for b in take(simt, "beta", default_beta)),
        gamma=tuple(float(g) for g in take(simt, "gamma", default_gamma)),
    )
    if simt:
        raise ConfigError(f"unknown [sim] keys {sorted(simt)}")

    oracle = OracleConfig(
        K_oracle=int(take(orat, "draws", 1_000_000)),
        target_se=float(take(orat, "target_se", 1e-3)),
        max_doublings=int(take(orat, "max_doublings", 4)),
        antithetic=bool(take(orat, "antithetic", True)),
    )
    if orat:
        raise ConfigError(f"unknown [oracle] keys {sorted(orat)}")

    config = ExperimentConfig(
        seed=int(take(exp, "seed", 0)),
        rho_grid=tuple(float(r) for r in take(exp, "rho", DEFAULT_RHO_GRID)),
        estimators=tuple(str(s) for s in take(exp, "estimators", DEFAULT_ESTIMATORS)),
        model=str(take(exp, "model", "gam-more")),
        sim=sim,
        oracle=oracle,
        use_true_gaussian=bool(take(exp, "use_true_gaussian", False)),
        jobs=int(take(exp, "jobs", 1)),
    )
    if exp:
        raise ConfigError(f"unknown [experiment] keys {sorted(exp)}")
    for rho in config.rho_grid:
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"rho must be in [0, 1), got {rho}")
    return config


def _fmt(x: float) -> str:
    return repr(float(x))


def write_long_csv(result: ExperimentResult, path) -> None:
    """Per-instance MAE rows: estimator, rho, instance, mae."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("estimator,rho,instance,mae\n")
        for cell in result.cells:
            if cell.report is None:
                continue
            for i, value in enumerate(cell.report.per_instance_mae):
                fh.write(f"{cell.estimator},{_fmt(cell.rho)},{i},{_fmt(value)}\n")


def write_summary_csv(result: ExperimentResult, path) -> None:
    """Mean scores per cell: estimator, rho, mean_mae, mse_v.

    Wall-clock runtimes go to the manifest so the CSVs stay reproducible.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("estimator,rho,mean_mae,mse_v\n")
        for cell in result.cells:
            if cell.report is None:
                continue
            fh.write(
                f"{cell.estimator},{_fmt(cell.rho)},"
                f"{_fmt(cell.report.mean_mae)},{_fmt(cell.report.mse_v)}\n"
            )
