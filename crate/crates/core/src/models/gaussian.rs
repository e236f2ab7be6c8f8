use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Model, TimeSeries};
use crate::error::{Error, Result};
use crate::seed::SimRng;

/// Location and scale of iid `N(mu, sigma^2)` data; `sigma` is the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Self {
        GaussianParams { mu, sigma }
    }

    pub fn check(&self) -> Result<()> {
        if self.sigma > 0.0 && self.sigma.is_finite() && self.mu.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianModel;

impl Model for GaussianModel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["mu", "sigma"]
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        GaussianParams::new(theta[0], theta[1]).check()
    }

    fn simulate_into(&self, theta: &[f64], t_len: usize, rng: &mut SimRng, out: &mut Vec<f64>) {
        let (mu, sigma) = (theta[0], theta[1]);
        out.clear();
        out.extend((0..t_len).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sigma * z
        }));
    }
}

pub fn simulate_gaussian(params: GaussianParams, t_len: usize, seed: u64) -> Result<TimeSeries> {
    GaussianModel.simulate(&[params.mu, params.sigma], t_len, seed)
}
