use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{GaussianParams, Ma2Params};

/// Population counterpart `b(θ)` of a summary map, with its Jacobian `∇θ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingValue {
    pub values: Vec<f64>,
    /// `k_eta × k_theta`.
    pub jacobian: Option<DMatrix<f64>>,
}

/// `b(θ) = (1 + θ1² + θ2², (1 + θ2) θ1, θ2)` for lag-0..2 autocovariances.
pub fn binding_ma2(params: Ma2Params) -> Result<BindingValue> {
    params.check()?;
    let (t1, t2) = (params.theta1, params.theta2);
    let values = vec![1.0 + t1 * t1 + t2 * t2, (1.0 + t2) * t1, t2];
    let jacobian = DMatrix::from_row_slice(3, 2, &[2.0 * t1, 2.0 * t2, 1.0 + t2, t1, 0.0, 1.0]);
    Ok(BindingValue { values, jacobian: Some(jacobian) })
}

/// `b(μ, σ) = (μ, σ²)` for the sample mean and variance.
pub fn binding_gaussian(params: GaussianParams) -> Result<BindingValue> {
    params.check()?;
    let GaussianParams { mu, sigma } = params;
    Ok(BindingValue {
        values: vec![mu, sigma * sigma],
        jacobian: Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0 * sigma])),
    })
}

/// `b(θ) = θ + aθ²` for the toy model's sample mean.
pub fn binding_toy(theta: f64, curvature: f64) -> BindingValue {
    BindingValue {
        values: vec![theta + curvature * theta * theta],
        jacobian: Some(DMatrix::from_element(1, 1, 1.0 + 2.0 * curvature * theta)),
    }
}
