"""Conditional Shapley values by exact coalition enumeration.

The package decomposes a model prediction f(x*) into per-feature
attributions phi_j using the Shapley value of the game
v(S) = E[f(x) | x_S = x*_S]. Coalitions are enumerated exactly (M <= 20),
and v is filled in by interchangeable estimators: Monte Carlo samplers of
the conditional feature distribution, per-coalition regressions, or a
single surrogate over masked augmented data. Regressions can run in-core
or in an external model server speaking a small length-prefixed protocol.
"""

from .bridge import BridgeRegressor, BridgeSession, BridgeSessionPool
from .coalitions import (
    MAX_FEATURES,
    Coalition,
    complement,
    enumerate_coalitions,
    full_mask,
    indicator_vector,
    member_indices,
    nontrivial_coalitions,
    popcounts,
    size_major_order,
)
from .data import Dataset, load_csv, write_csv
from .engine import (
    CoalitionTable,
    Explanation,
    compute_shapley,
    compute_shapley_batch,
    verify_axioms,
    weight_table,
)
from .errors import (
    AxiomViolation,
    BridgeError,
    CondshapError,
    ConfigError,
    DataError,
    EstimatorError,
    IncompleteTableError,
    NumericalError,
)
from .estimators import (
    AugmentationPlan,
    EmpiricalEstimator,
    GaussianMCEstimator,
    IndependenceEstimator,
    MCConfig,
    SeparateRegressionEstimator,
    SurrogateEstimator,
    parse_estimator_spec,
)
from .explain import ExplainResult, explain_instances
from .gaussian import (
    GaussianModel,
    cholesky_with_jitter,
    conditional_coefficients,
    conditional_gaussian,
    fit_gaussian,
    sample_mvn,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import MetricReport, mae, mse_v, mse_v_per_coalition, spearman
from .models import (
    GAM_MORE_BETA,
    GAM_MORE_GAMMA,
    GamMoreModel,
    LinearModel,
    PredictiveModel,
    RegressorModel,
)
from .oracle import (
    OracleConfig,
    OracleResult,
    true_shapley_gaussian,
    true_shapley_gaussian_batch,
)
from .regressors import (
    KnnRegressor,
    OlsRegressor,
    RegressorSpec,
    RidgeBasisRegressor,
    expand_basis,
    make_regressor,
)
from .rng import derive_seed, substream
from .sim import (
    ExperimentConfig,
    ExperimentResult,
    SimConfig,
    ar1_covariance,
    gen_mvn_data,
    make_response,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan",
    "AxiomViolation",
    "BridgeError",
    "BridgeRegressor",
    "BridgeSession",
    "BridgeSessionPool",
    "Coalition",
    "CoalitionTable",
    "CondshapError",
    "ConfigError",
    "DataError",
    "Dataset",
    "EmpiricalEstimator",
    "EstimatorError",
    "ExplainResult",
    "Explanation",
    "ExperimentConfig",
    "ExperimentResult",
    "GAM_MORE_BETA",
    "GAM_MORE_GAMMA",
    "GamMoreModel",
    "GaussianMCEstimator",
    "GaussianModel",
    "IncompleteTableError",
    "IndependenceEstimator",
    "KERNEL_BACKEND",
    "KnnRegressor",
    "LinearModel",
    "MAX_FEATURES",
    "MCConfig",
    "MetricReport",
    "NumericalError",
    "OlsRegressor",
    "OracleConfig",
    "OracleResult",
    "PredictiveModel",
    "RegressorModel",
    "RegressorSpec",
    "RidgeBasisRegressor",
    "SeparateRegressionEstimator",
    "SimConfig",
    "SurrogateEstimator",
    "ar1_covariance",
    "cholesky_with_jitter",
    "complement",
    "compute_shapley",
    "compute_shapley_batch",
    "conditional_coefficients",
    "conditional_gaussian",
    "derive_seed",
    "enumerate_coalitions",
    "expand_basis",
    "explain_instances",
    "fit_gaussian",
    "full_mask",
    "gen_mvn_data",
    "indicator_vector",
    "load_csv",
    "mae",
    "make_regressor",
    "make_response",
    "member_indices",
    "mse_v",
    "mse_v_per_coalition",
    "nontrivial_coalitions",
    "parse_estimator_spec",
    "popcounts",
    "run_experiment",
    "sample_mvn",
    "size_major_order",
    "spearman",
    "substream",
    "true_shapley_gaussian",
    "true_shapley_gaussian_batch",
    "verify_axioms",
    "weight_table",
    "write_csv",
    "__version__",
]
