use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{abc_knn, abc_knn_prefixes, abc_reject_first_k, abc_reject_many, AbcOutcome, AbcProblem};
use super::screen::MomentScreen;
use super::simulator::{ModelSimulator, SummarySource};
use crate::error::{Error, Result};
use crate::models::PriorRegion;
use crate::seed::{derive_seed, mix};
use crate::summaries::{DistanceSpec, SummaryVector};

/// What each replication runs against its observed data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SamplingPlan {
    /// One stream of `n` proposals judged at every tolerance.
    Reject {
        eps: Vec<f64>,
        n: u64,
    },
    Knn {
        alpha: f64,
        n: u64,
    },
    /// One stream; each tolerance keeps its first `k` acceptances.
    RejectFirstK {
        eps: Vec<f64>,
        k: usize,
        max_n: u64,
    },
    /// One stream; run `j` keeps the `K_j` nearest of the first `N_j` proposals.
    KnnPrefixes {
        runs: Vec<(usize, u64)>,
    },
}

impl SamplingPlan {
    /// Number of outcomes each replication produces.
    pub fn n_outcomes(&self) -> usize {
        match self {
            SamplingPlan::Knn { .. } => 1,
            SamplingPlan::Reject { eps, .. } | SamplingPlan::RejectFirstK { eps, .. } => eps.len(),
            SamplingPlan::KnnPrefixes { runs } => runs.len(),
        }
    }

    /// Upper bound on proposals per replication.
    pub fn max_proposals(&self) -> u64 {
        match self {
            SamplingPlan::Reject { n, .. } | SamplingPlan::Knn { n, .. } => *n,
            SamplingPlan::RejectFirstK { max_n, .. } => *max_n,
            SamplingPlan::KnnPrefixes { runs } => runs.iter().map(|r| r.1).max().unwrap_or(0),
        }
    }

    pub fn eps_max(&self) -> Option<f64> {
        match self {
            SamplingPlan::Reject { eps, .. } | SamplingPlan::RejectFirstK { eps, .. } => {
                eps.iter().copied().reduce(f64::max)
            }
            _ => None,
        }
    }
}

/// A replication study: `R` observed data sets drawn at `theta0`, each analysed by `plan`.
#[derive(Debug, Clone)]
pub struct ReplicationStudy {
    pub simulator: ModelSimulator,
    pub theta0: Vec<f64>,
    pub prior: PriorRegion,
    pub distance: DistanceSpec,
    pub plan: SamplingPlan,
    /// Moment screen width in standard deviations; `None` simulates every proposal.
    /// Ignored by nearest-neighbour plans.
    pub screen_sigmas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub rep: u64,
    pub observed_seed: u64,
    pub proposal_seed: u64,
    pub observed: SummaryVector,
    pub outcomes: Vec<AbcOutcome>,
}

/// Seed of replication `r`'s observed data: `mix(master, r)`.
pub fn observed_seed(master: u64, rep: u64) -> u64 {
    mix(master, rep)
}

/// Seed of replication `r`'s proposal stream; chunk `i` then uses `mix(proposal_seed, i)`.
pub fn proposal_seed(master: u64, rep: u64) -> u64 {
    derive_seed(master, &[rep, 1])
}

pub fn run_replication(study: &ReplicationStudy, rep: u64, master_seed: u64) -> Result<Replication> {
    let obs_seed = observed_seed(master_seed, rep);
    let prop_seed = proposal_seed(master_seed, rep);
    let observed = study.simulator.observe(&study.theta0, obs_seed)?;
    let screen = match (study.screen_sigmas, study.plan.eps_max()) {
        (Some(k), Some(eps)) => Some(MomentScreen::new(&observed.values, eps, &study.distance, k)),
        _ => None,
    };
    let source: &dyn SummarySource = &study.simulator;
    let mut problem = AbcProblem::new(&observed, &study.prior, source, &study.distance);
    if let Some(s) = &screen {
        problem = problem.with_screen(s);
    }
    let outcomes = match &study.plan {
        SamplingPlan::Reject { eps, n } => abc_reject_many(&problem, eps, *n, prop_seed)?,
        SamplingPlan::Knn { alpha, n } => vec![abc_knn(&problem, *alpha, *n, prop_seed)?],
        SamplingPlan::RejectFirstK { eps, k, max_n } => abc_reject_first_k(&problem, eps, *k, *max_n, prop_seed)?,
        SamplingPlan::KnnPrefixes { runs } => abc_knn_prefixes(&problem, runs, prop_seed)?,
    };
    Ok(Replication { rep, observed_seed: obs_seed, proposal_seed: prop_seed, observed, outcomes })
}

/// Runs replications `0..r` in parallel. Empty samples are recorded in the outcomes, not
/// raised; use [`empty_counts`] to inspect them.
pub fn run_replications(study: &ReplicationStudy, r: u64, master_seed: u64) -> Result<Vec<Replication>> {
    if r == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if study.theta0.len() != study.simulator.param_dim() {
        return Err(Error::Shape(format!(
            "theta0 has {} components, model expects {}",
            study.theta0.len(),
            study.simulator.param_dim()
        )));
    }
    (0..r).into_par_iter().map(|rep| run_replication(study, rep, master_seed)).collect()
}

/// Per outcome slot, the replication indices whose sample came back empty.
pub fn empty_counts(reps: &[Replication]) -> Vec<Vec<u64>> {
    let slots = reps.first().map_or(0, |r| r.outcomes.len());
    (0..slots).map(|j| reps.iter().filter(|r| r.outcomes[j].is_empty()).map(|r| r.rep).collect()).collect()
}
