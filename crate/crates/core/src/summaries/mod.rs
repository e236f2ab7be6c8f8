//! Summary statistics `η(·)`, their binding functions `b(θ)` and distances on summary space.

mod binding;
mod distance;

pub use binding::{binding_gaussian, binding_ma2, binding_toy, BindingValue};
pub use distance::{distance, DistanceSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TimeSeries;

/// The statistics `η(y)` together with the name of the map that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryVector {
    pub values: Vec<f64>,
    pub summary_id: String,
}

impl SummaryVector {
    pub fn new(values: Vec<f64>, summary_id: impl Into<String>) -> Self {
        SummaryVector { values, summary_id: summary_id.into() }
    }

    pub fn k_eta(&self) -> usize {
        self.values.len()
    }
}

/// Named summary maps selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMap {
    /// Sample autocovariances at lags `0..=max_lag`, divisor `T`.
    AutoCov { max_lag: usize },
    /// Sample mean and unbiased sample variance.
    MeanVar,
    /// Sample mean alone.
    ToyMean,
}

impl SummaryMap {
    /// Parses `autocov:J`, `mean_var` or `toy_mean`.
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "mean_var" => Ok(SummaryMap::MeanVar),
            "toy_mean" => Ok(SummaryMap::ToyMean),
            other => {
                let lag = other.strip_prefix("autocov:").and_then(|j| j.parse::<usize>().ok()).ok_or_else(|| {
                    Error::Config(format!("unknown summary `{other}` (expected autocov:J, mean_var or toy_mean)"))
                })?;
                Ok(SummaryMap::AutoCov { max_lag: lag })
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            SummaryMap::AutoCov { max_lag } => format!("autocov:{max_lag}"),
            SummaryMap::MeanVar => "mean_var".into(),
            SummaryMap::ToyMean => "toy_mean".into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SummaryMap::AutoCov { max_lag } => max_lag + 1,
            SummaryMap::MeanVar => 2,
            SummaryMap::ToyMean => 1,
        }
    }

    pub fn min_len(&self) -> usize {
        match self {
            SummaryMap::AutoCov { max_lag } => max_lag + 1,
            SummaryMap::MeanVar => 2,
            SummaryMap::ToyMean => 1,
        }
    }

    /// Writes the statistics of `y` into `out`; `y.len() >= self.min_len()` is assumed.
    pub fn compute_into(&self, y: &[f64], out: &mut [f64]) {
        match *self {
            SummaryMap::AutoCov { max_lag } => autocov_into(y, max_lag, out),
            SummaryMap::MeanVar => {
                let (m, v) = mean_and_var(y);
                out[0] = m;
                out[1] = v;
            }
            SummaryMap::ToyMean => out[0] = y.iter().sum::<f64>() / y.len() as f64,
        }
    }

    pub fn compute(&self, y: &TimeSeries) -> Result<SummaryVector> {
        if y.values.len() < self.min_len() {
            return Err(Error::Size(format!(
                "summary {} needs at least {} observations, got {}",
                self.id(),
                self.min_len(),
                y.values.len()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.compute_into(&y.values, &mut out);
        Ok(SummaryVector::new(out, self.id()))
    }
}

#[inline]
fn autocov_into(y: &[f64], max_lag: usize, out: &mut [f64]) {
    let t = y.len() as f64;
    for (j, slot) in out.iter_mut().enumerate().take(max_lag + 1) {
        let mut acc = 0.0;
        for s in j..y.len() {
            acc += y[s] * y[s - j];
        }
        *slot = acc / t;
    }
}

fn mean_and_var(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let ss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    (m, ss / (n - 1.0))
}

/// `η_j(y) = T⁻¹ Σ_{t=1+j}^{T} y_t y_{t-j}` for `j = 0..=max_lag`.
pub fn autocovariances(y: &TimeSeries, max_lag: usize) -> Result<SummaryVector> {
    if max_lag >= y.values.len() {
        return Err(Error::Size(format!("max_lag {max_lag} must be below T = {}", y.values.len())));
    }
    SummaryMap::AutoCov { max_lag }.compute(y)
}

/// `(x̄, s²)` with the unbiased variance.
pub fn mean_var(y: &TimeSeries) -> Result<SummaryVector> {
    SummaryMap::MeanVar.compute(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_gaussian, simulate_ma2, GaussianParams, Ma2Params};
    use approx::assert_relative_eq;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec(), 0)
    }

    #[test]
    fn spike_autocovariance() {
        let s = autocovariances(&ts(&[1.0, 0.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!(s.values, vec![0.25, 0.0, 0.0]);
        assert_eq!(s.summary_id, "autocov:2");
    }

    #[test]
    fn constant_series_autocovariance_uses_divisor_t() {
        let c = 1.7;
        let s = autocovariances(&ts(&[c; 4]), 2).unwrap();
        assert_relative_eq!(s.values[0], c * c, epsilon = 1e-14);
        assert_relative_eq!(s.values[1], 3.0 * c * c / 4.0, epsilon = 1e-14);
        assert_relative_eq!(s.values[2], 2.0 * c * c / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn lag_must_be_below_length() {
        assert!(matches!(autocovariances(&ts(&[1.0, 2.0]), 2), Err(Error::Size(_))));
    }

    #[test]
    fn mean_var_small_cases() {
        assert_eq!(mean_var(&ts(&[1.0, 1.0, 1.0])).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(mean_var(&ts(&[0.0, 2.0])).unwrap().values, vec![1.0, 2.0]);
        assert!(mean_var(&ts(&[1.0])).is_err());
    }

    #[test]
    fn ma2_autocovariances_match_binding() {
        // Lag-j sample autocovariances against b(θ) = (1+θ1²+θ2², (1+θ2)θ1, θ2),
        // with the Monte Carlo SE taken from Bartlett's formula.
        let t = 1_000_000;
        let y = simulate_ma2(Ma2Params::new(0.6, 0.2), t, 2024).unwrap();
        let s = autocovariances(&y, 2).unwrap();
        let target = [1.40, 0.72, 0.20];
        let bartlett = [6.154, 4.155, 3.117];
        for j in 0..3 {
            let se = (bartlett[j] / t as f64).sqrt();
            assert!((s.values[j] - target[j]).abs() < 3.0 * se, "lag {j}: {}", s.values[j]);
        }
    }

    #[test]
    fn ma2_moment_match_on_grid() {
        let t = 1_000_000;
        let grid = [(0.0, 0.0), (0.6, 0.2), (-0.5, 0.3), (1.0, 0.5), (0.2, -0.6)];
        for (k, &(t1, t2)) in grid.iter().enumerate() {
            let p = Ma2Params::new(t1, t2);
            let y = simulate_ma2(p, t, 100 + k as u64).unwrap();
            let s = autocovariances(&y, 2).unwrap();
            let b = binding_ma2(p).unwrap().values;
            let g = [b[0], b[1], b[2]];
            for j in 0..3 {
                // Bartlett: T var(γ̂_j) = Σ_k γ_k² + γ_{k+j} γ_{k-j}.
                let gam = |k: i64| g.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0);
                let var: f64 = (-4i64..=4).map(|k| gam(k) * gam(k) + gam(k + j as i64) * gam(k - j as i64)).sum();
                let se = (var / t as f64).sqrt();
                assert!((s.values[j] - b[j]).abs() < 4.0 * se, "θ={p:?} lag {j}");
            }
        }
    }

    #[test]
    fn gaussian_mean_var_long_run() {
        let t = 1_000_000;
        let y = simulate_gaussian(GaussianParams::new(1.0, 1.0), t, 77).unwrap();
        let s = mean_var(&y).unwrap();
        assert!((s.values[0] - 1.0).abs() < 4.0 / (t as f64).sqrt());
        assert!((s.values[1] - 1.0).abs() < 4.0 * (2.0 / t as f64).sqrt());
    }

    #[test]
    fn parse_names() {
        assert_eq!(SummaryMap::parse("autocov:2").unwrap(), SummaryMap::AutoCov { max_lag: 2 });
        assert_eq!(SummaryMap::parse("mean_var").unwrap().dim(), 2);
        assert!(SummaryMap::parse("autocov:x").is_err());
        assert!(SummaryMap::parse("median").is_err());
    }
}
