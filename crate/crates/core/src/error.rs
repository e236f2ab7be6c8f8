use thiserror::Error;

/// Errors raised by the engine, the oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {params:?} lies outside the {region} region")]
    RegionViolation { region: &'static str, params: Vec<f64> },

    #[error("size error: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no proposal was accepted out of {n_proposals} (smallest distance {min_distance})")]
    EmptySample { n_proposals: u64, min_distance: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("draws are degenerate: {0}")]
    Degenerate(String),

    #[error("unknown experiment `{name}`; registered experiments: {registered}")]
    UnknownExperiment { name: String, registered: String },

    #[error("simulation budget exceeded: {requested} simulations requested, cap is {cap}")]
    BudgetExceeded { requested: u128, cap: u128 },

    #[error("{failed} of {total} replications returned no accepted draws")]
    PartialFailure { failed: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
