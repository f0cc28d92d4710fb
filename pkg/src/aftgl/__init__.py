"""Bayesian group-lasso AFT models for left-truncated, interval-censored data."""

from aftgl.data import (
    DataError,
    GroupStructure,
    SurvivalDataset,
    back_transform,
    group_orthonormalize,
    load_dataset,
    standardize_columns,
    validate_dataset,
)
from aftgl.diagnostics import (
    ConvergenceSummary,
    effective_sample_size,
    gelman_rubin,
    summarize_convergence,
)
from aftgl.dists import (
    LogNormalParams,
    RngStream,
    mills_ratio,
    sample_inverse_gaussian,
    sample_scenario_error,
    sample_skew_normal,
    sample_truncated_lognormal,
)
from aftgl.likelihood import (
    FitView,
    ModelParameters,
    PriorConfig,
    complete_data_loglik,
    prepare,
)
from aftgl.sampler import (
    ChainOutput,
    SamplerConfig,
    SamplerError,
    run_chain,
    run_chains,
)
from aftgl.selection import (
    SelectionError,
    SelectionResult,
    compute_snc,
    refit_univariable_aft,
    selection_metrics,
    snc_bic_select,
    summarize_posterior,
)
from aftgl.simbench import (
    ScenarioSpec,
    aggregate_results,
    make_replication_dataset,
    parse_scenario_file,
    run_replications,
)

__all__ = [
    "ChainOutput",
    "ConvergenceSummary",
    "DataError",
    "FitView",
    "GroupStructure",
    "LogNormalParams",
    "ModelParameters",
    "PriorConfig",
    "RngStream",
    "SamplerConfig",
    "SamplerError",
    "ScenarioSpec",
    "SelectionError",
    "SelectionResult",
    "SurvivalDataset",
    "aggregate_results",
    "back_transform",
    "complete_data_loglik",
    "compute_snc",
    "effective_sample_size",
    "gelman_rubin",
    "group_orthonormalize",
    "load_dataset",
    "make_replication_dataset",
    "mills_ratio",
    "parse_scenario_file",
    "prepare",
    "refit_univariable_aft",
    "run_chain",
    "run_chains",
    "run_replications",
    "sample_inverse_gaussian",
    "sample_scenario_error",
    "sample_skew_normal",
    "sample_truncated_lognormal",
    "selection_metrics",
    "snc_bic_select",
    "standardize_columns",
    "summarize_convergence",
    "summarize_posterior",
    "validate_dataset",
    "__version__",
]

__version__ = "0.1.0"
