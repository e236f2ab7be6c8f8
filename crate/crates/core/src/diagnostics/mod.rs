//! Posterior summaries and the replication studies built on them.

mod density;
mod rmse;
mod shape;
mod slope;
mod studies;

pub use density::{
    credible_interval, kde, rmse_density, Bandwidth, DensityEstimate, MIN_INTERVAL_DRAWS, MIN_KDE_DRAWS,
};
pub use rmse::{gaussian_exact_marginals, gaussian_rmse_study, rmse_from_replications, RmseCell, RmseReport};
pub use shape::{
    regime_test, shape_report, RegimeTest, ShapeContext, ShapeRegime, ShapeReport, MIN_SHAPE_DRAWS, QC_REFERENCE_DRAWS,
};
pub use slope::{
    acceptance_slope, fit_log_slope, log_grid, SlopeFit, SlopePair, SlopeRegime, LARGE_REGIME_MIN, SMALL_REGIME_MAX,
};
pub use studies::{
    concentration_curve, coverage_from_replications, coverage_study, outside_mass, posterior_mean_from_replications,
    posterior_mean_study, ConcentrationPoint, CoverageCell, CoverageReport, MeanCell, FAILURE_FLAG_FRACTION,
};
