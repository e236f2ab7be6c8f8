use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{AbcProblem, CHUNK_SIZE};
use super::simulator::SummarySource;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, SimRng};

/// `η(z) = θ`: a noiseless source whose acceptance probabilities are prior masses of balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentitySource {
    pub dim: usize,
}

impl SummarySource for IdentitySource {
    fn summary_id(&self) -> String {
        "identity".into()
    }

    fn summary_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn draw_summary(&self, theta: &[f64], _: &mut SimRng, _: &mut Vec<f64>, out: &mut [f64]) {
        out.copy_from_slice(theta);
    }
}

/// Defensive mixture proposal `q = λ π + (1 − λ) N(m, C)` for estimating acceptance
/// probabilities; importance weights `π/q` are bounded by `1/λ`.
#[derive(Debug, Clone)]
pub struct ImportanceProposal {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
    pub prior_weight: f64,
}

impl ImportanceProposal {
    pub fn new(mean: &[f64], cov: DMatrix<f64>, prior_weight: f64) -> Result<Self> {
        let k = mean.len();
        if cov.shape() != (k, k) {
            return Err(Error::Shape(format!("proposal covariance must be {k}x{k}")));
        }
        if !(prior_weight > 0.0 && prior_weight <= 1.0) {
            return Err(Error::Config(format!("prior weight must lie in (0, 1], got {prior_weight}")));
        }
        let chol = Cholesky::new(cov).ok_or_else(|| Error::NotPositiveDefinite("proposal covariance".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(ImportanceProposal { mean: DVector::from_column_slice(mean), chol, log_norm, prior_weight })
    }

    fn normal_density(&self, theta: &[f64]) -> f64 {
        let d = DVector::from_column_slice(theta) - &self.mean;
        let z = self.chol.l().solve_lower_triangular(&d).expect("nonsingular");
        (self.log_norm - 0.5 * z.norm_squared()).exp()
    }

    fn draw_normal(&self, rng: &mut SimRng, out: &mut [f64]) {
        let z = DVector::from_fn(out.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.mean + self.chol.l() * z;
        out.copy_from_slice(x.as_slice());
    }
}

/// Estimated acceptance probability at one tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub eps: f64,
    pub rate: f64,
    pub se: f64,
    /// Proposals with distance at most `eps`.
    pub hits: u64,
    pub n: u64,
}

#[derive(Default, Clone)]
struct Moments {
    hits: Vec<u64>,
    sum_w: Vec<f64>,
    sum_w2: Vec<f64>,
}

impl Moments {
    fn new(m: usize) -> Self {
        Moments { hits: vec![0; m], sum_w: vec![0.0; m], sum_w2: vec![0.0; m] }
    }

    fn merge(mut self, o: Moments) -> Self {
        for j in 0..self.hits.len() {
            self.hits[j] += o.hits[j];
            self.sum_w[j] += o.sum_w[j];
            self.sum_w2[j] += o.sum_w2[j];
        }
        self
    }
}

/// Acceptance probability `P{d(η(z), η(y)) ≤ ε}` under `π(θ)p(z|θ)` at every tolerance in
/// `eps_grid`, from one stream of `n` proposals. Without a proposal this is the plain
/// acceptance fraction of Algorithm 1; with one, proposals come from `q` and are weighted by
/// `π/q`, which leaves the estimate unbiased.
pub fn acceptance_rates(
    problem: &AbcProblem<'_>,
    eps_grid: &[f64],
    n: u64,
    seed: u64,
    proposal: Option<&ImportanceProposal>,
) -> Result<Vec<RateEstimate>> {
    problem.validate()?;
    if n == 0 || eps_grid.is_empty() {
        return Err(Error::Config("acceptance rates need proposals and a tolerance grid".into()));
    }
    let mut order: Vec<usize> = (0..eps_grid.len()).collect();
    order.sort_by(|&a, &b| eps_grid[a].total_cmp(&eps_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&j| eps_grid[j]).collect();
    let prior_density = problem.prior.volume().recip();
    let m = sorted.len();
    let chunk = |c: u64| {
        let mut acc = Moments::new(m);
        let mut rng = rng_from_seed(derive_seed(seed, &[c]));
        let mut theta = vec![0.0; problem.prior.dim()];
        let mut summary = vec![0.0; problem.source.summary_dim()];
        let mut scratch = Vec::new();
        let start = c * CHUNK_SIZE;
        for _ in start..(start + CHUNK_SIZE).min(n) {
            let w = match proposal {
                None => {
                    problem.prior.sample_into(&mut rng, &mut theta);
                    1.0
                }
                Some(q) => {
                    if rng.random::<f64>() < q.prior_weight {
                        problem.prior.sample_into(&mut rng, &mut theta);
                    } else {
                        q.draw_normal(&mut rng, &mut theta);
                        if !problem.prior.contains(&theta) {
                            continue;
                        }
                    }
                    prior_density / (q.prior_weight * prior_density + (1.0 - q.prior_weight) * q.normal_density(&theta))
                }
            };
            if problem.screen.is_some_and(|s| !s.admits(problem.source, &theta)) {
                continue;
            }
            problem.source.draw_summary(&theta, &mut rng, &mut scratch, &mut summary);
            let d = problem.distance.eval(&summary, &problem.observed.values);
            let first = sorted.partition_point(|&e| e < d);
            for j in first..m {
                acc.hits[j] += 1;
                acc.sum_w[j] += w;
                acc.sum_w2[j] += w * w;
            }
        }
        acc
    };
    let total = (0..n.div_ceil(CHUNK_SIZE)).into_par_iter().map(chunk).reduce(|| Moments::new(m), Moments::merge);
    let nf = n as f64;
    let mut out = vec![None; m];
    for (s, &j) in order.iter().enumerate() {
        let rate = total.sum_w[s] / nf;
        let var = (total.sum_w2[s] / nf - rate * rate).max(0.0) / nf;
        out[j] = Some(RateEstimate { eps: sorted[s], rate, se: var.sqrt(), hits: total.hits[s], n });
    }
    Ok(out.into_iter().map(|r| r.expect("filled")).collect())
}
