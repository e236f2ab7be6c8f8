//! ABC samplers, tolerance schedules and the replication runner.

mod rates;
mod replicate;
mod sampler;
mod schedule;
mod screen;
mod simulator;

pub use rates::{acceptance_rates, IdentitySource, ImportanceProposal, RateEstimate};
pub use replicate::{
    empty_counts, observed_seed, proposal_seed, run_replication, run_replications, Replication, ReplicationStudy,
    SamplingPlan,
};
pub use sampler::{
    abc_knn, abc_knn_prefixes, abc_reject, abc_reject_first_k, abc_reject_many, retained_count, AbcOutcome, AbcProblem,
    Particle, PosteriorSample, CHUNK_SIZE,
};
pub use schedule::{alpha_from_schedule, epsilon_from_schedule, ToleranceSchedule};
pub use screen::{MomentScreen, DEFAULT_SCREEN_SIGMAS};
pub use simulator::{ma2_autocov_moments, ModelSimulator, ModelSpec, SimulationPath, SummarySource};
