use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Model, TimeSeries};
use crate::error::Result;
use crate::seed::SimRng;

/// Scalar location model `y_t ~ N(b(θ), 1)` with quadratic binding `b(θ) = θ + aθ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarToyParams {
    pub theta: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModel {
    pub curvature: f64,
}

impl ToyModel {
    pub fn new(curvature: f64) -> Self {
        ToyModel { curvature }
    }

    #[inline]
    pub fn binding(&self, theta: f64) -> f64 {
        theta + self.curvature * theta * theta
    }
}

impl Model for ToyModel {
    fn name(&self) -> &'static str {
        "toy"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn check_params(&self, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    fn simulate_into(&self, theta: &[f64], t_len: usize, rng: &mut SimRng, out: &mut Vec<f64>) {
        let b = self.binding(theta[0]);
        out.clear();
        out.extend((0..t_len).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            b + z
        }));
    }
}

pub fn simulate_toy(params: ScalarToyParams, t_len: usize, seed: u64) -> Result<TimeSeries> {
    ToyModel::new(params.curvature).simulate(&[params.theta], t_len, seed)
}
