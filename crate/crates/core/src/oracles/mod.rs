//! Reference results: exact Gaussian posteriors, concentration rates and limit laws.

mod exact;
mod limits;
mod rates;

pub use exact::{
    exact_gaussian_posterior, exact_gaussian_posterior_from_stats, GaussianStats, GridPosterior, DEFAULT_JOINT_GRID,
};
pub use limits::{
    inverse_sqrt, sample_gaussian, sample_qc, sample_uniform_ellipsoid, variance_gap, LimitShapeSpec, VarianceGap,
    PSD_TOLERANCE,
};
pub use rates::{concentration_rate, lambda_t, Deviation, DeviationModel, RateReport};
