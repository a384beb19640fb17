"""kinkreg: threshold regression with kink/jump discrimination.

Estimates the threshold location with and without the continuity (kink)
restriction, tests continuity via a wild-bootstrapped quasi-likelihood-ratio
statistic, provides Monte Carlo size/power and convergence-rate harnesses,
simulates the nonstandard limit laws, and evaluates a minimax lower bound on
threshold estimation risk.
"""

from ._version import __version__
from .asymptotics import (
    BoundInputs,
    LimitParams,
    default_g_max,
    estimate_limit_params,
    kink_limit_draw,
    minimax_lower_bound,
    restriction_matrix,
    tn_limit_draw,
)
from .continuity import (
    MultiplierDistribution,
    TestReport,
    bootstrap_statistic,
    draw_multipliers,
    p_value_from_draws,
    run_test,
    tn_statistic,
)
from .estimation import (
    FitResult,
    GridProfiler,
    ThresholdGrid,
    build_grid,
    fit,
    profile_fit,
    robust_covariance,
    robust_standard_errors,
)
from .exceptions import (
    DegenerateFitError,
    EmptyGridError,
    InvalidConfigError,
    KinkRegError,
    ParseError,
    SchemaError,
    SingularDesignError,
)
from .model import Dataset, RegimeSplit, ThetaPoint, augmented_regressors, fitted_values, ssr
from .montecarlo import (
    DELTA_SCHEDULES,
    DeltaSchedule,
    DgpSetting,
    ExperimentConfig,
    RateStudy,
    SizePowerTable,
    rate_study,
    simulate_dgp,
    size_power_experiment,
    warp_speed_rates,
)
from .rng import substream

__all__ = [
    "__version__",
    "Dataset",
    "ThetaPoint",
    "RegimeSplit",
    "augmented_regressors",
    "fitted_values",
    "ssr",
    "ThresholdGrid",
    "FitResult",
    "GridProfiler",
    "build_grid",
    "profile_fit",
    "fit",
    "robust_covariance",
    "robust_standard_errors",
    "MultiplierDistribution",
    "TestReport",
    "tn_statistic",
    "draw_multipliers",
    "bootstrap_statistic",
    "run_test",
    "p_value_from_draws",
    "DgpSetting",
    "DeltaSchedule",
    "DELTA_SCHEDULES",
    "ExperimentConfig",
    "SizePowerTable",
    "RateStudy",
    "simulate_dgp",
    "warp_speed_rates",
    "size_power_experiment",
    "rate_study",
    "LimitParams",
    "BoundInputs",
    "kink_limit_draw",
    "tn_limit_draw",
    "minimax_lower_bound",
    "estimate_limit_params",
    "restriction_matrix",
    "default_g_max",
    "substream",
    "KinkRegError",
    "InvalidConfigError",
    "EmptyGridError",
    "SingularDesignError",
    "DegenerateFitError",
    "ParseError",
    "SchemaError",
]
