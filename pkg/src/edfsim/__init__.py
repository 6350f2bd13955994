"""Simulation tools for empirical distribution functions of correlated Gaussians."""

from .corrmodels import (
    CorrelationStructure,
    ModelSpec,
    build_alternate,
    build_dense,
    build_equi,
    build_factor,
    build_from_spec,
    build_long_range,
    build_sample_corr,
    build_sign_factor,
    build_weak_range,
    model_spec,
    three_factor_loadings,
    to_dense,
)
from .diagnostics import assess, gamma_m, moment_sequence, moment_sum, rate, report
from .edf import ProcessGrid, detrended_indicator, edf, modified_path, rescaled_path
from .errors import (
    ApproximationError,
    ConfigError,
    DegenerateSampleError,
    DenseCapError,
    EdfsimError,
    NotPositiveSemidefiniteError,
    ParameterError,
    TruncationError,
)
from .fdr import (
    FdpApprox,
    FdpSample,
    TwoGroupConfig,
    bh_threshold,
    fdp,
    fdp_gaussian_approx,
    gamma0,
    group_rates,
    run_fdp_experiment,
    t_star,
    two_group_sample,
)
from .hermite import (
    HermiteSeriesConfig,
    c1_values,
    edf_cov,
    hermite,
    indicator_coeff,
    indicator_cov,
    limit_kernel,
    projected_bridge_kernel,
)
from .limitproc import LimitSimConfig, integral_weight_check, sample_limit, sample_limit_many
from .mc import ExperimentConfig, McSummary, figure1_data, load, persist, run_edf_experiment
from .normal import phi, quantile, upper_quantile, upper_tail
from .sampler import RngStream, plan, sample, sample_two_level

__version__ = "0.1.0"

__all__ = [
    "ApproximationError",
    "ConfigError",
    "CorrelationStructure",
    "DegenerateSampleError",
    "DenseCapError",
    "EdfsimError",
    "ExperimentConfig",
    "FdpApprox",
    "FdpSample",
    "HermiteSeriesConfig",
    "LimitSimConfig",
    "McSummary",
    "ModelSpec",
    "NotPositiveSemidefiniteError",
    "ParameterError",
    "ProcessGrid",
    "RngStream",
    "TruncationError",
    "TwoGroupConfig",
    "assess",
    "bh_threshold",
    "build_alternate",
    "build_dense",
    "build_equi",
    "build_factor",
    "build_from_spec",
    "build_long_range",
    "build_sample_corr",
    "build_sign_factor",
    "build_weak_range",
    "c1_values",
    "detrended_indicator",
    "edf",
    "edf_cov",
    "fdp",
    "fdp_gaussian_approx",
    "figure1_data",
    "gamma0",
    "gamma_m",
    "group_rates",
    "hermite",
    "indicator_coeff",
    "indicator_cov",
    "integral_weight_check",
    "limit_kernel",
    "load",
    "model_spec",
    "modified_path",
    "moment_sequence",
    "moment_sum",
    "persist",
    "phi",
    "plan",
    "projected_bridge_kernel",
    "quantile",
    "rate",
    "report",
    "rescaled_path",
    "run_edf_experiment",
    "run_fdp_experiment",
    "sample",
    "sample_limit",
    "sample_limit_many",
    "sample_two_level",
    "t_star",
    "three_factor_loadings",
    "to_dense",
    "two_group_sample",
    "upper_quantile",
    "upper_tail",
]
