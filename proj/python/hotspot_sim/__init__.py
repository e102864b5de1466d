"""Python access to the hotspot simulation core."""

from ._hotspot import (
    ConfigError,
    ContractViolation,
    ExperimentConfig,
    FitReport,
    SeppParams,
    SpatialDomain,
    cell_integral,
    conditional_intensity,
    daily_cell_counts,
    default_beta_grid,
    default_initial_params,
    fit,
    mavg_fit_bandwidth,
    mavg_forecast_mse,
    offspring_mean,
    run_experiment,
    sample_events,
    spearman,
    theta_for_offspring_mean,
    triggering,
    background_intensity,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "ExperimentConfig",
    "FitReport",
    "SeppParams",
    "SpatialDomain",
    "background_intensity",
    "cell_integral",
    "conditional_intensity",
    "daily_cell_counts",
    "default_beta_grid",
    "default_initial_params",
    "fit",
    "mavg_fit_bandwidth",
    "mavg_forecast_mse",
    "offspring_mean",
    "run_experiment",
    "sample_events",
    "spearman",
    "theta_for_offspring_mean",
    "triggering",
]
