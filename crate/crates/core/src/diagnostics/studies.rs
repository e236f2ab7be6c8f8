use serde::{Deserialize, Serialize};

use super::density::{credible_interval, MIN_INTERVAL_DRAWS};
use crate::engine::{run_replications, PosteriorSample, Replication, ReplicationStudy};
use crate::error::{Error, Result};
use crate::stats::{lilliefors_critical, lilliefors_statistic, mean, std_dev, Level};

/// Cells whose share of failed replications exceeds this are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub schedule: String,
    pub param: String,
    pub avg_width: f64,
    pub coverage_pct: f64,
    /// Replications that produced an interval.
    pub r: usize,
    /// Replications with an empty or too-small sample.
    pub failed: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub level: f64,
    pub cells: Vec<CoverageCell>,
}

impl CoverageReport {
    pub fn cell(&self, schedule: &str, param: &str) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.schedule == schedule && c.param == param)
    }
}

fn check_labels(reps: &[Replication], labels: &[String]) -> Result<()> {
    if reps.is_empty() {
        return Err(Error::Config("no replications to summarize".into()));
    }
    if reps.iter().any(|r| r.outcomes.len() != labels.len()) {
        return Err(Error::Shape(format!("expected {} outcomes per replication", labels.len())));
    }
    Ok(())
}

fn usable(sample: Option<&PosteriorSample>, min: usize) -> Option<&PosteriorSample> {
    sample.filter(|s| s.len() >= min)
}

/// Per schedule × parameter: average width of the equal-tailed credible interval and the
/// percentage of replications whose interval contains `theta0`.
pub fn coverage_from_replications(
    reps: &[Replication],
    labels: &[String],
    param_names: &[&str],
    theta0: &[f64],
    level: f64,
) -> Result<CoverageReport> {
    check_labels(reps, labels)?;
    let mut cells = Vec::new();
    for (j, label) in labels.iter().enumerate() {
        for (p, name) in param_names.iter().enumerate() {
            let mut widths = Vec::new();
            let mut hits = 0usize;
            for rep in reps {
                if let Some(s) = usable(rep.outcomes[j].sample(), MIN_INTERVAL_DRAWS) {
                    let (lo, hi) = credible_interval(&s.column(p), level)?;
                    widths.push(hi - lo);
                    hits += usize::from(lo <= theta0[p] && theta0[p] <= hi);
                }
            }
            let failed = reps.len() - widths.len();
            let r = widths.len();
            cells.push(CoverageCell {
                schedule: label.clone(),
                param: name.to_string(),
                avg_width: if r > 0 { mean(&widths) } else { f64::NAN },
                coverage_pct: if r > 0 { 100.0 * hits as f64 / r as f64 } else { f64::NAN },
                r,
                failed,
                flagged: failed as f64 > FAILURE_FLAG_FRACTION * reps.len() as f64,
            });
        }
    }
    Ok(CoverageReport { level, cells })
}

/// Runs `r` replications of `study` and summarizes their credible-interval coverage.
pub fn coverage_study(
    study: &ReplicationStudy,
    labels: &[String],
    param_names: &[&str],
    r: u64,
    master_seed: u64,
    level: f64,
) -> Result<CoverageReport> {
    if r < 100 {
        return Err(Error::Config(format!("coverage studies need R >= 100, got {r}")));
    }
    let reps = run_replications(study, r, master_seed)?;
    coverage_from_replications(&reps, labels, param_names, &study.theta0, level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPoint {
    pub t_len: usize,
    /// Replication average of the posterior mass outside the `δ`-ball.
    pub outside_mass: f64,
    pub se: f64,
    pub per_rep: Vec<f64>,
}

/// Fraction of draws with `‖θ − θ₀‖ > δ`.
pub fn outside_mass(sample: &PosteriorSample, theta0: &[f64], delta: f64) -> f64 {
    let outside = sample
        .particles
        .iter()
        .filter(|p| p.theta.iter().zip(theta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > delta)
        .count();
    outside as f64 / sample.len() as f64
}

/// Replication-averaged mass outside the `δ`-ball around `theta0` for each sample size.
pub fn concentration_curve(
    samples: &[(usize, Vec<PosteriorSample>)],
    theta0: &[f64],
    delta: f64,
) -> Result<Vec<ConcentrationPoint>> {
    if samples.len() < 2 {
        return Err(Error::Config("a concentration curve needs at least two values of T".into()));
    }
    samples
        .iter()
        .map(|(t_len, reps)| {
            let per_rep: Vec<f64> =
                reps.iter().filter(|s| !s.is_empty()).map(|s| outside_mass(s, theta0, delta)).collect();
            if per_rep.is_empty() {
                return Err(Error::EmptySample { n_proposals: 0, min_distance: f64::NAN });
            }
            let se = if per_rep.len() > 1 { std_dev(&per_rep) / (per_rep.len() as f64).sqrt() } else { f64::NAN };
            Ok(ConcentrationPoint { t_len: *t_len, outside_mass: mean(&per_rep), se, per_rep })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCell {
    pub schedule: String,
    pub param: String,
    /// Average of the posterior means minus the true value.
    pub bias: f64,
    pub bias_se: f64,
    /// Lilliefors statistic of the standardized means `√T(E_Π θ − θ₀)`.
    pub ks_stat: f64,
    pub ks_critical_1pct: f64,
    pub normal_at_1pct: bool,
    pub r: usize,
    pub standardized: Vec<f64>,
}

impl MeanCell {
    pub fn unbiased_at(&self, n_se: f64) -> bool {
        self.bias.abs() < n_se * self.bias_se
    }
}

/// Distribution of the posterior mean across replications, per schedule and parameter.
pub fn posterior_mean_from_replications(
    reps: &[Replication],
    labels: &[String],
    param_names: &[&str],
    theta0: &[f64],
    t_len: usize,
) -> Result<Vec<MeanCell>> {
    check_labels(reps, labels)?;
    let root_t = (t_len as f64).sqrt();
    let mut cells = Vec::new();
    for (j, label) in labels.iter().enumerate() {
        let means: Vec<Vec<f64>> = reps.iter().filter_map(|r| r.outcomes[j].sample()).map(|s| s.mean()).collect();
        if means.len() < 3 {
            return Err(Error::EmptySample { n_proposals: 0, min_distance: f64::NAN });
        }
        for (p, name) in param_names.iter().enumerate() {
            let col: Vec<f64> = means.iter().map(|m| m[p]).collect();
            let standardized: Vec<f64> = col.iter().map(|m| root_t * (m - theta0[p])).collect();
            let n = col.len();
            let ks_stat = lilliefors_statistic(&standardized);
            let crit = lilliefors_critical(n, Level::OnePercent);
            cells.push(MeanCell {
                schedule: label.clone(),
                param: name.to_string(),
                bias: mean(&col) - theta0[p],
                bias_se: std_dev(&col) / (n as f64).sqrt(),
                ks_stat,
                ks_critical_1pct: crit,
                normal_at_1pct: ks_stat <= crit,
                r: n,
                standardized,
            });
        }
    }
    Ok(cells)
}

pub fn posterior_mean_study(
    study: &ReplicationStudy,
    labels: &[String],
    param_names: &[&str],
    r: u64,
    master_seed: u64,
) -> Result<Vec<MeanCell>> {
    if r < 200 {
        return Err(Error::Config(format!("posterior-mean studies need R >= 200, got {r}")));
    }
    let reps = run_replications(study, r, master_seed)?;
    posterior_mean_from_replications(&reps, labels, param_names, &study.theta0, study.simulator.t_len)
}
