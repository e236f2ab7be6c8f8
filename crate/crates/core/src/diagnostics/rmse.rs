use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{kde, rmse_density, Bandwidth, MIN_KDE_DRAWS};
use super::studies::FAILURE_FLAG_FRACTION;
use crate::engine::{run_replications, ModelSpec, Replication, ReplicationStudy};
use crate::error::{Error, Result};
use crate::models::PriorRegion;
use crate::oracles::{exact_gaussian_posterior_from_stats, GaussianStats, GridPosterior};
use crate::stats::mean;
use crate::summaries::SummaryMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseCell {
    pub schedule: String,
    pub param: String,
    pub avg_rmse: f64,
    /// `avg_rmse` divided by the reference schedule's `avg_rmse` for the same parameter.
    pub ratio_to_reference: f64,
    pub r: usize,
    pub failed: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub reference: String,
    pub bandwidth: Bandwidth,
    pub cells: Vec<RmseCell>,
}

impl RmseReport {
    pub fn cell(&self, schedule: &str, param: &str) -> Option<&RmseCell> {
        self.cells.iter().find(|c| c.schedule == schedule && c.param == param)
    }
}

/// Average density RMSE per schedule × parameter against per-replication exact marginals.
///
/// `exact[i][p]` is the exact marginal of parameter `p` for `reps[i]`; the KDE of each
/// sample is evaluated on that grid. Ratios are taken against schedule `reference`.
pub fn rmse_from_replications(
    reps: &[Replication],
    labels: &[String],
    param_names: &[&str],
    exact: &[Vec<GridPosterior>],
    reference: usize,
    bandwidth: Bandwidth,
) -> Result<RmseReport> {
    if reps.is_empty() || reps.len() != exact.len() {
        return Err(Error::Shape(format!("{} replications but {} exact posteriors", reps.len(), exact.len())));
    }
    if reference >= labels.len() {
        return Err(Error::Config(format!("reference schedule {reference} out of range")));
    }
    if reps.iter().any(|r| r.outcomes.len() != labels.len()) || exact.iter().any(|e| e.len() != param_names.len()) {
        return Err(Error::Shape("replication outcomes do not match the schedule and parameter lists".into()));
    }
    let mut avg = vec![vec![f64::NAN; param_names.len()]; labels.len()];
    let mut counts = vec![vec![0usize; param_names.len()]; labels.len()];
    for j in 0..labels.len() {
        for p in 0..param_names.len() {
            let mut vals = Vec::new();
            for (rep, ex) in reps.iter().zip(exact) {
                let Some(s) = rep.outcomes[j].sample().filter(|s| s.len() >= MIN_KDE_DRAWS) else {
                    continue;
                };
                match kde(&s.column(p), &ex[p].grid, bandwidth) {
                    Ok(est) => vals.push(rmse_density(&est, &ex[p])?),
                    Err(Error::Degenerate(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            counts[j][p] = vals.len();
            if !vals.is_empty() {
                avg[j][p] = mean(&vals);
            }
        }
    }
    let mut cells = Vec::new();
    for (j, label) in labels.iter().enumerate() {
        for (p, name) in param_names.iter().enumerate() {
            let failed = reps.len() - counts[j][p];
            cells.push(RmseCell {
                schedule: label.clone(),
                param: name.to_string(),
                avg_rmse: avg[j][p],
                ratio_to_reference: avg[j][p] / avg[reference][p],
                r: counts[j][p],
                failed,
                flagged: failed as f64 > FAILURE_FLAG_FRACTION * reps.len() as f64,
            });
        }
    }
    Ok(RmseReport { reference: labels[reference].clone(), bandwidth, cells })
}

/// Exact `(μ, σ)` marginals for a Gaussian replication, rebuilt from its observed `(x̄, s²)`.
pub fn gaussian_exact_marginals(
    rep: &Replication,
    prior: &PriorRegion,
    t_len: usize,
    grid_size: usize,
) -> Result<Vec<GridPosterior>> {
    let PriorRegion::Box { bounds } = prior else {
        return Err(Error::Config("the exact Gaussian posterior needs a box prior".into()));
    };
    if bounds.len() != 2 || rep.observed.values.len() != 2 {
        return Err(Error::Shape("the exact Gaussian posterior is two-dimensional".into()));
    }
    let stats = GaussianStats { mean: rep.observed.values[0], var: rep.observed.values[1], t_len };
    let (mu, sigma) = exact_gaussian_posterior_from_stats(stats, [bounds[0], bounds[1]], grid_size)?;
    Ok(vec![mu, sigma])
}

/// Runs a Gaussian `mean_var` study and compares each schedule's marginal KDEs with the exact
/// posterior of the same observed data.
pub fn gaussian_rmse_study(
    study: &ReplicationStudy,
    labels: &[String],
    reference: usize,
    r: u64,
    master_seed: u64,
    grid_size: usize,
) -> Result<(Vec<Replication>, RmseReport)> {
    if !matches!(study.simulator.model, ModelSpec::Gaussian(_)) || study.simulator.summary != SummaryMap::MeanVar {
        return Err(Error::Config("the RMSE study needs the Gaussian model with mean_var summaries".into()));
    }
    let reps = run_replications(study, r, master_seed)?;
    let exact = reps
        .par_iter()
        .map(|rep| gaussian_exact_marginals(rep, &study.prior, study.simulator.t_len, grid_size))
        .collect::<Result<Vec<_>>>()?;
    let report = rmse_from_replications(&reps, labels, &["mu", "sigma"], &exact, reference, Bandwidth::Silverman)?;
    Ok((reps, report))
}
