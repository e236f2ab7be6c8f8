use serde::{Deserialize, Serialize};

use super::SummaryVector;
use crate::error::{Error, Result};

/// Distance on summary space: Euclidean, optionally after dividing each component by a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceSpec {
    #[default]
    Euclidean,
    DiagonalWeighted {
        weights: Vec<f64>,
    },
}

impl DistanceSpec {
    pub fn validate(&self, k_eta: usize) -> Result<()> {
        if let DistanceSpec::DiagonalWeighted { weights } = self {
            if weights.len() != k_eta {
                return Err(Error::Shape(format!("{} weights for a {k_eta}-dimensional summary", weights.len())));
            }
            if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(Error::Config("distance weights must be strictly positive".into()));
            }
        }
        Ok(())
    }

    /// Distance between raw component slices of equal length.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceSpec::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceSpec::DiagonalWeighted { weights } => a
                .iter()
                .zip(b)
                .zip(weights)
                .map(|((x, y), w)| {
                    let d = (x - y) / w;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Largest factor by which this distance can shrink a Euclidean displacement.
    pub(crate) fn max_weight(&self) -> f64 {
        match self {
            DistanceSpec::Euclidean => 1.0,
            DistanceSpec::DiagonalWeighted { weights } => weights.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// `‖a − b‖` under `spec`.
pub fn distance(a: &SummaryVector, b: &SummaryVector, spec: &DistanceSpec) -> Result<f64> {
    if a.values.len() != b.values.len() || a.summary_id != b.summary_id {
        return Err(Error::Shape(format!(
            "cannot compare {} ({}) with {} ({})",
            a.summary_id,
            a.values.len(),
            b.summary_id,
            b.values.len()
        )));
    }
    spec.validate(a.values.len())?;
    Ok(spec.eval(&a.values, &b.values))
}
