//! Data-generating processes and priors for the three study models.
//!
//! Every simulator is a pure function of `(params, T, seed)`.

mod gaussian;
mod ma2;
mod prior;
mod toy;

pub use gaussian::{simulate_gaussian, GaussianModel, GaussianParams};
pub use ma2::{simulate_ma2, InnovationLaw, Ma2Model, Ma2Params};
pub use prior::{sample_prior, PriorRegion};
pub use toy::{simulate_toy, ScalarToyParams, ToyModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// An observed or simulated series `y_1..y_T` and the seed that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub t_len: usize,
    pub seed: u64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, seed: u64) -> Self {
        let t_len = values.len();
        TimeSeries { values, t_len, seed }
    }
}

/// A parametric simulator over flat parameter vectors.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;

    fn param_names(&self) -> &'static [&'static str];

    fn param_dim(&self) -> usize {
        self.param_names().len()
    }

    /// Validates `theta` against the model's parameter space.
    fn check_params(&self, theta: &[f64]) -> Result<()>;

    /// Smallest admissible series length.
    fn min_len(&self) -> usize {
        1
    }

    /// Writes `t_len` observations into `out` (cleared first). `theta` must already be valid.
    fn simulate_into(&self, theta: &[f64], t_len: usize, rng: &mut SimRng, out: &mut Vec<f64>);

    fn simulate(&self, theta: &[f64], t_len: usize, seed: u64) -> Result<TimeSeries> {
        if theta.len() != self.param_dim() {
            return Err(Error::Shape(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.param_dim(),
                theta.len()
            )));
        }
        self.check_params(theta)?;
        if t_len < self.min_len() {
            return Err(Error::Size(format!("{} needs T >= {}, got {t_len}", self.name(), self.min_len())));
        }
        let mut rng = rng_from_seed(seed);
        let mut values = Vec::with_capacity(t_len);
        self.simulate_into(theta, t_len, &mut rng, &mut values);
        Ok(TimeSeries { values, t_len, seed })
    }
}
