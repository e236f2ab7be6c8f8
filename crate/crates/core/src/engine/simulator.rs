use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{GaussianModel, Ma2Model, Model, ToyModel};
use crate::seed::SimRng;
use crate::summaries::{SummaryMap, SummaryVector};

/// Something that maps a parameter draw to a simulated summary `η(z)`.
pub trait SummarySource: Send + Sync {
    fn summary_id(&self) -> String;

    fn summary_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    /// Simulates pseudo-data under `theta` and writes `η(z)` into `out`.
    fn draw_summary(&self, theta: &[f64], rng: &mut SimRng, scratch: &mut Vec<f64>, out: &mut [f64]);

    /// Mean and covariance of `η(z)` under `theta`, when known in closed form.
    fn summary_moments(&self, _theta: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        None
    }
}

/// Which route produces `η(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationPath {
    /// Simulate the full series, then apply the summary map.
    #[default]
    Data,
    /// Draw the summary from its exact sampling law where the model admits one
    /// (Gaussian `mean_var`, toy `toy_mean`); falls back to `Data` otherwise.
    Sufficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Ma2(Ma2Model),
    Gaussian(GaussianModel),
    Toy(ToyModel),
}

impl ModelSpec {
    pub fn as_model(&self) -> &dyn Model {
        match self {
            ModelSpec::Ma2(m) => m,
            ModelSpec::Gaussian(m) => m,
            ModelSpec::Toy(m) => m,
        }
    }
}

/// A study model composed with a summary map at a fixed series length `T`.
#[derive(Debug, Clone)]
pub struct ModelSimulator {
    pub model: ModelSpec,
    pub summary: SummaryMap,
    pub t_len: usize,
    pub path: SimulationPath,
}

impl ModelSimulator {
    pub fn new(model: ModelSpec, summary: SummaryMap, t_len: usize) -> Result<Self> {
        let min = model.as_model().min_len().max(summary.min_len());
        if t_len < min {
            return Err(Error::Size(format!("T = {t_len} is below the minimum {min}")));
        }
        Ok(ModelSimulator { model, summary, t_len, path: SimulationPath::Data })
    }

    pub fn with_path(mut self, path: SimulationPath) -> Self {
        self.path = path;
        self
    }

    /// Simulates the observed data set under `theta0` and summarizes it.
    pub fn observe(&self, theta0: &[f64], seed: u64) -> Result<SummaryVector> {
        let y = self.model.as_model().simulate(theta0, self.t_len, seed)?;
        self.summary.compute(&y)
    }
}

impl SummarySource for ModelSimulator {
    fn summary_id(&self) -> String {
        self.summary.id()
    }

    fn summary_dim(&self) -> usize {
        self.summary.dim()
    }

    fn param_dim(&self) -> usize {
        self.model.as_model().param_dim()
    }

    #[inline]
    fn draw_summary(&self, theta: &[f64], rng: &mut SimRng, scratch: &mut Vec<f64>, out: &mut [f64]) {
        let t = self.t_len as f64;
        if self.path == SimulationPath::Sufficient {
            match (&self.model, self.summary) {
                (ModelSpec::Gaussian(_), SummaryMap::MeanVar) => {
                    let (mu, sigma) = (theta[0], theta[1]);
                    let z: f64 = StandardNormal.sample(rng);
                    let chi: f64 = ChiSquared::new(t - 1.0).expect("T >= 2").sample(rng);
                    out[0] = mu + sigma * z / t.sqrt();
                    out[1] = sigma * sigma * chi / (t - 1.0);
                    return;
                }
                (ModelSpec::Toy(toy), SummaryMap::ToyMean) => {
                    let z: f64 = StandardNormal.sample(rng);
                    out[0] = toy.binding(theta[0]) + z / t.sqrt();
                    return;
                }
                _ => {}
            }
        }
        if let (ModelSpec::Ma2(m), SummaryMap::AutoCov { max_lag }) = (&self.model, self.summary) {
            if max_lag <= 2 {
                // One pass, no series buffer; same arithmetic order as `compute_into`.
                let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
                let (mut y1, mut y2) = (0.0, 0.0);
                let mut s = 0usize;
                m.stream(theta, self.t_len, rng, |y| {
                    a0 += y * y;
                    if s >= 1 {
                        a1 += y * y1;
                    }
                    if s >= 2 {
                        a2 += y * y2;
                    }
                    y2 = y1;
                    y1 = y;
                    s += 1;
                });
                let acc = [a0, a1, a2];
                for (j, slot) in out.iter_mut().enumerate().take(max_lag + 1) {
                    *slot = acc[j] / t;
                }
                return;
            }
        }
        self.model.as_model().simulate_into(theta, self.t_len, rng, scratch);
        self.summary.compute_into(scratch, out);
    }

    fn summary_moments(&self, theta: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let t = self.t_len as f64;
        match (&self.model, self.summary) {
            (ModelSpec::Ma2(m), SummaryMap::AutoCov { max_lag }) => {
                Some(ma2_autocov_moments(theta, max_lag, self.t_len, m.innovation.excess_kurtosis()))
            }
            (ModelSpec::Gaussian(_), SummaryMap::MeanVar) => {
                let (mu, s2) = (theta[0], theta[1] * theta[1]);
                let cov = DMatrix::from_row_slice(2, 2, &[s2 / t, 0.0, 0.0, 2.0 * s2 * s2 / (t - 1.0)]);
                Some((vec![mu, s2], cov))
            }
            (ModelSpec::Toy(toy), SummaryMap::ToyMean) => {
                Some((vec![toy.binding(theta[0])], DMatrix::from_element(1, 1, 1.0 / t)))
            }
            _ => None,
        }
    }
}

/// Finite-`T` mean `(T-j)/T γ_j` and Bartlett covariance of the lag-0..J autocovariances of
/// an MA(2) series, including the fourth-cumulant term for non-Gaussian innovations.
pub fn ma2_autocov_moments(theta: &[f64], max_lag: usize, t_len: usize, kurt: f64) -> (Vec<f64>, DMatrix<f64>) {
    let (t1, t2) = (theta[0], theta[1]);
    let gamma = [1.0 + t1 * t1 + t2 * t2, (1.0 + t2) * t1, t2];
    let g = |k: i64| -> f64 {
        let k = k.unsigned_abs() as usize;
        if k <= 2 {
            gamma[k]
        } else {
            0.0
        }
    };
    let t = t_len as f64;
    let k = max_lag + 1;
    let mean: Vec<f64> = (0..k).map(|j| (t - j as f64) / t * g(j as i64)).collect();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let (ii, jj) = (i as i64, j as i64);
            let mut s = kurt * g(ii) * g(jj);
            for h in -4i64..=4 {
                s += g(h) * g(h + jj - ii) + g(h + jj) * g(h - ii);
            }
            cov[(i, j)] = s / t;
            cov[(j, i)] = s / t;
        }
    }
    (mean, cov)
}
