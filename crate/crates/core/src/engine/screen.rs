use serde::{Deserialize, Serialize};

use super::simulator::SummarySource;
use crate::summaries::DistanceSpec;

/// Skips simulation for proposals whose acceptance probability is negligible.
///
/// A proposal `θ` can only be accepted if `η(z)` lands in the tolerance ball around
/// `η(y)`. With `m(θ)`, `Σ(θ) = L L'` the mean and covariance of `η(z)`, that requires
/// `‖L⁻¹(η(z) − m)‖ ≥ ‖L⁻¹(η(y) − m)‖ − r ‖L⁻¹‖`, where `r` bounds the Euclidean radius of
/// the ball. Proposals whose lower bound exceeds `k_sigma` are recorded as rejected
/// (infinite distance) without simulating. Sources without closed-form moments are never
/// screened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentScreen {
    observed: Vec<f64>,
    radius: f64,
    pub k_sigma: f64,
}

pub const DEFAULT_SCREEN_SIGMAS: f64 = 10.0;

const MAX_DIM: usize = 6;

impl MomentScreen {
    /// `eps_max` is the largest tolerance the screened run will use.
    pub fn new(observed: &[f64], eps_max: f64, distance: &DistanceSpec, k_sigma: f64) -> Self {
        MomentScreen { observed: observed.to_vec(), radius: eps_max * distance.max_weight(), k_sigma }
    }

    /// Lower bound on the standardized distance between `η(z)` and the tolerance ball,
    /// or `None` when the source has no usable moments.
    pub fn standardized_gap(&self, source: &dyn SummarySource, theta: &[f64]) -> Option<f64> {
        let (mean, cov) = source.summary_moments(theta)?;
        let k = mean.len();
        if k > MAX_DIM || k != self.observed.len() {
            return None;
        }
        let mut l = [0.0f64; MAX_DIM * MAX_DIM];
        for i in 0..k {
            for j in 0..=i {
                let mut s = cov[(i, j)];
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * k + i] = s.sqrt();
                } else {
                    l[i * k + j] = s / l[j * k + j];
                }
            }
        }
        // Forward solve L z = η(y) − m and accumulate ‖z‖².
        let mut z = [0.0f64; MAX_DIM];
        let mut znorm2 = 0.0;
        for i in 0..k {
            let mut s = self.observed[i] - mean[i];
            for p in 0..i {
                s -= l[i * k + p] * z[p];
            }
            z[i] = s / l[i * k + i];
            znorm2 += z[i] * z[i];
        }
        // Frobenius norm of L⁻¹ bounds its operator norm from above.
        let mut inv = [0.0f64; MAX_DIM * MAX_DIM];
        let mut inv_norm2 = 0.0;
        for c in 0..k {
            for i in c..k {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for p in c..i {
                    s -= l[i * k + p] * inv[p * k + c];
                }
                inv[i * k + c] = s / l[i * k + i];
                inv_norm2 += inv[i * k + c] * inv[i * k + c];
            }
        }
        Some(znorm2.sqrt() - self.radius * inv_norm2.sqrt())
    }

    #[inline]
    pub fn admits(&self, source: &dyn SummarySource, theta: &[f64]) -> bool {
        match self.standardized_gap(source, theta) {
            Some(gap) => gap <= self.k_sigma,
            None => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulator::{ModelSimulator, ModelSpec};
    use crate::models::{GaussianModel, Ma2Model};
    use crate::summaries::SummaryMap;

    #[test]
    fn gap_matches_hand_computation_for_diagonal_case() {
        let sim = ModelSimulator::new(ModelSpec::Gaussian(GaussianModel), SummaryMap::MeanVar, 101).unwrap();
        // θ = (1, 1): m = (1, 1), Σ = diag(1/101, 2/100).
        let screen = MomentScreen::new(&[1.3, 1.0], 0.0, &DistanceSpec::Euclidean, 10.0);
        let gap = screen.standardized_gap(&sim, &[1.0, 1.0]).unwrap();
        assert!((gap - 0.3 * 101f64.sqrt()).abs() < 1e-12);
        let screen = MomentScreen::new(&[1.3, 1.0], 0.1, &DistanceSpec::Euclidean, 10.0);
        let gap2 = screen.standardized_gap(&sim, &[1.0, 1.0]).unwrap();
        let inv_frob = (101.0f64 + 50.0).sqrt();
        assert!((gap2 - (0.3 * 101f64.sqrt() - 0.1 * inv_frob)).abs() < 1e-12);
    }

    #[test]
    fn true_parameter_is_always_admitted() {
        let sim =
            ModelSimulator::new(ModelSpec::Ma2(Ma2Model::default()), SummaryMap::AutoCov { max_lag: 2 }, 500).unwrap();
        let obs = sim.observe(&[0.6, 0.2], 3).unwrap();
        let screen = MomentScreen::new(&obs.values, 0.03, &DistanceSpec::Euclidean, DEFAULT_SCREEN_SIGMAS);
        assert!(screen.admits(&sim, &[0.6, 0.2]));
        assert!(!screen.admits(&sim, &[-1.5, 0.8]));
    }
}
