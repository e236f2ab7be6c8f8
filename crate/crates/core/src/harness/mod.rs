//! Configuration ingestion, experiment recipes, manifests and output files.

mod config;
mod experiments;
pub mod io;
mod manifest;
mod studies;

pub use config::{
    derive_budget, n_for_retained, Budget, ModelConfig, OneOrMany, RunConfig, DEFAULT_BUDGET_CAP, DEFAULT_MAX_N,
};
pub use experiments::{
    analytic_slope, bias_study, find_recipe, gap_study, random_gap_instance, registered_names, run_experiment,
    toy_inverse_binding, BiasReport, BiasRow, ExperimentResult, ExperimentRun, ExperimentSpec, GapReport, Recipe,
    DEFAULT_SEED, EXPERIMENTS,
};
pub use manifest::{
    exact_gaussian_table, execute, rates_oracle, read_series_csv, replay, Execution, FileCheck, Invocation,
    OutputRecord, RatesOracle, ReplayReport, RunManifest, CODE_VERSION, MANIFEST_FILE,
};
pub use studies::{
    binding_at, kde_curve, limit_spec, replicate_at, run_study, stage_stats, DiagConfig, DiagOptions, DiagStudy,
    FailureNote, ShapeSummaryRow, SlopeOptions, SlopeResult, StageStats, StudyResult, StudyRun,
};
