use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Ma2Params;
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Support of a uniform prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorRegion {
    /// The bounded MA(2) invertibility triangle, vertices (-2, 1), (2, 1), (0, -1).
    TriangleMa2,
    /// A product of closed intervals.
    Box { bounds: Vec<(f64, f64)> },
}

impl PriorRegion {
    pub fn unit_box(bounds: &[(f64, f64)]) -> Self {
        PriorRegion::Box { bounds: bounds.to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        if let PriorRegion::Box { bounds } = self {
            if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                return Err(Error::Config(format!("invalid prior box {bounds:?}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorRegion::TriangleMa2 => 2,
            PriorRegion::Box { bounds } => bounds.len(),
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            PriorRegion::TriangleMa2 => theta.len() == 2 && Ma2Params::from(theta).in_region(),
            PriorRegion::Box { bounds } => {
                theta.len() == bounds.len() && theta.iter().zip(bounds).all(|(x, (lo, hi))| (*lo..=*hi).contains(x))
            }
        }
    }

    /// Lebesgue measure of the support.
    pub fn volume(&self) -> f64 {
        match self {
            PriorRegion::TriangleMa2 => 4.0,
            PriorRegion::Box { bounds } => bounds.iter().map(|(lo, hi)| hi - lo).product(),
        }
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        if self.contains(theta) {
            1.0 / self.volume()
        } else {
            0.0
        }
    }

    /// Smallest axis-aligned box containing the support.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            PriorRegion::TriangleMa2 => vec![(-2.0, 2.0), (-1.0, 1.0)],
            PriorRegion::Box { bounds } => bounds.clone(),
        }
    }

    /// Draws one point into `out`, returning how many bounding-box candidates were needed.
    pub fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) -> u32 {
        match self {
            PriorRegion::Box { bounds } => {
                for (x, (lo, hi)) in out.iter_mut().zip(bounds) {
                    *x = lo + (hi - lo) * rng.random::<f64>();
                }
                1
            }
            PriorRegion::TriangleMa2 => {
                let mut attempts = 0;
                loop {
                    attempts += 1;
                    let t1 = -2.0 + 4.0 * rng.random::<f64>();
                    let t2 = -1.0 + 2.0 * rng.random::<f64>();
                    if t1 + t2 >= -1.0 && t1 - t2 <= 1.0 {
                        out[0] = t1;
                        out[1] = t2;
                        return attempts;
                    }
                }
            }
        }
    }
}

/// `n` iid uniform draws on `region`.
pub fn sample_prior(region: &PriorRegion, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let mut theta = vec![0.0; region.dim()];
            region.sample_into(&mut rng, &mut theta);
            theta
        })
        .collect()
}
