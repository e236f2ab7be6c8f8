use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::ma2_autocov_moments;
use crate::error::{Error, Result};
use crate::models::{GaussianParams, Ma2Params};
use crate::seed::{rng_from_seed, SimRng};
use crate::summaries::{binding_gaussian, binding_ma2};

/// Local geometry at `θ₀` that determines the limiting posterior shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitShapeSpec {
    /// `G₀ = ∇θ b(θ₀)`, `k_η × k_θ`.
    pub jacobian: DMatrix<f64>,
    /// `B₀ = G₀'G₀`.
    pub b0: DMatrix<f64>,
    /// Limit covariance of `v_T{η(y) − b(θ₀)}`.
    pub v0: DMatrix<f64>,
    /// Scaling matrix with `Σ_T = v_T A₀`.
    pub a0: DMatrix<f64>,
    /// `lim v_T ε_T`.
    pub c: f64,
}

impl LimitShapeSpec {
    pub fn new(jacobian: DMatrix<f64>, v0: DMatrix<f64>, a0: DMatrix<f64>, c: f64) -> Result<Self> {
        let k = jacobian.nrows();
        if v0.shape() != (k, k) || a0.shape() != (k, k) {
            return Err(Error::Shape(format!("V0 {:?} and A0 {:?} must both be {k}x{k}", v0.shape(), a0.shape())));
        }
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("c must be nonnegative, got {c}")));
        }
        let b0 = jacobian.transpose() * &jacobian;
        Ok(LimitShapeSpec { jacobian, b0, v0, a0, c })
    }

    /// Spec with `A₀ = V₀^{-1/2}`, so that `Σ_T{η(y) − b(θ₀)}` is asymptotically standard normal.
    pub fn with_standardizing_scale(jacobian: DMatrix<f64>, v0: DMatrix<f64>, c: f64) -> Result<Self> {
        let a0 = inverse_sqrt(&v0)?;
        LimitShapeSpec::new(jacobian, v0, a0, c)
    }

    /// Gaussian model with the `(x̄, s²)` summaries.
    pub fn gaussian_model(mu: f64, sigma: f64, c: f64) -> Result<Self> {
        let g = binding_gaussian(GaussianParams::new(mu, sigma))?.jacobian.expect("closed form");
        let s2 = sigma * sigma;
        let v0 = DMatrix::from_row_slice(2, 2, &[s2, 0.0, 0.0, 2.0 * s2 * s2]);
        LimitShapeSpec::with_standardizing_scale(g, v0, c)
    }

    /// MA(2) with lag 0..2 autocovariances and innovations of the given excess kurtosis.
    pub fn ma2_model(theta: Ma2Params, kurtosis: f64, c: f64) -> Result<Self> {
        let g = binding_ma2(theta)?.jacobian.expect("closed form");
        // at T = 1 the Bartlett covariance is the limit covariance itself
        let (_, v0) = ma2_autocov_moments(&theta.as_vec(), 2, 1, kurtosis);
        LimitShapeSpec::with_standardizing_scale(g, v0, c)
    }

    pub fn k_eta(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn k_theta(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Covariance of `v_T(θ − θ₀)` in the Gaussian limit, `(G₀'V₀⁻¹G₀)⁻¹`.
    pub fn gaussian_limit_cov(&self) -> Result<DMatrix<f64>> {
        Ok(variance_gap(&self.jacobian, &self.v0)?.optimal_var)
    }
}

fn require_pd(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{what} must be square, got {:?}", m.shape())));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(format!("{what} is not positive definite")))
}

/// Symmetric inverse square root of a positive definite matrix.
pub fn inverse_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_pd(m, "matrix")?;
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Uniform draw from the unit ball in `k` dimensions.
pub(crate) fn unit_ball(rng: &mut SimRng, k: usize) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 0.0 {
            let r: f64 = rng.random::<f64>().powf(1.0 / k as f64);
            return z * (r / norm);
        }
    }
}

/// `n` uniform draws on `{w : w'B₀w ≤ 1}`. With `B₀ = LL'`, `w = L'⁻¹u` for `u` uniform on the
/// unit ball.
pub fn sample_uniform_ellipsoid(b0: &DMatrix<f64>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let chol = require_pd(b0, "B0")?;
    let lt = chol.l().transpose();
    let k = b0.nrows();
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let u = unit_ball(&mut rng, k);
            lt.solve_upper_triangular(&u).expect("nonsingular").iter().copied().collect()
        })
        .collect())
}

/// `n` draws from `Q_c`: `Z + U` with `Z ~ N(0, I)` and `U` uniform on `{u : u'A₀'A₀u ≤ c²}`.
pub fn sample_qc(spec: &LimitShapeSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    require_pd(&spec.a0, "A0")?;
    if !(spec.c > 0.0) {
        return Err(Error::Domain(format!("Q_c needs c > 0, got {}", spec.c)));
    }
    let a_inv = spec.a0.clone().try_inverse().ok_or_else(|| Error::NotPositiveDefinite("A0 is singular".into()))?;
    let k = spec.k_eta();
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let u = &a_inv * unit_ball(&mut rng, k) * spec.c;
            let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            (z + u).iter().copied().collect()
        })
        .collect())
}

/// `n` standard normal vectors of dimension `k`.
pub fn sample_gaussian(k: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Asymptotic variances of the posterior mean under summary matching versus the efficient
/// moment estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGap {
    /// `(G'G)⁻¹G'VG(G'G)⁻¹`
    pub projection_var: DMatrix<f64>,
    /// `(G'V⁻¹G)⁻¹`
    pub optimal_var: DMatrix<f64>,
    pub gap: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// All eigenvalues of `gap` are at least `-1e-10 · max(1, ‖projection_var‖)`.
    pub psd: bool,
}

pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn variance_gap(g0: &DMatrix<f64>, v0: &DMatrix<f64>) -> Result<VarianceGap> {
    let (k_eta, k_theta) = g0.shape();
    if k_eta < k_theta {
        return Err(Error::RankDeficient(format!("G0 is {k_eta}x{k_theta}; need k_eta >= k_theta")));
    }
    if v0.shape() != (k_eta, k_eta) {
        return Err(Error::Shape(format!("V0 must be {k_eta}x{k_eta}, got {:?}", v0.shape())));
    }
    let sv = g0.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > smax * 1e-12 * k_eta as f64) {
        return Err(Error::RankDeficient(format!("G0 singular values {smin:e}..{smax:e}")));
    }
    let v_chol = require_pd(v0, "V0")?;
    let gtg_inv =
        (g0.transpose() * g0).try_inverse().ok_or_else(|| Error::RankDeficient("G0'G0 is singular".into()))?;
    let projection = &gtg_inv * g0.transpose() * v0 * g0 * &gtg_inv;
    let vinv_g = v_chol.solve(g0);
    let optimal =
        (g0.transpose() * vinv_g).try_inverse().ok_or_else(|| Error::Numerical("G0'V0^-1 G0 is singular".into()))?;
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let (projection_var, optimal_var) = (sym(projection), sym(optimal));
    let gap = &projection_var - &optimal_var;
    let min_eigenvalue = SymmetricEigen::new(gap.clone()).eigenvalues.min();
    // Square G0 gives a gap of exactly zero, computed as a difference of two large matrices.
    let tol = PSD_TOLERANCE * projection_var.norm().max(1.0);
    Ok(VarianceGap { projection_var, optimal_var, gap, min_eigenvalue, psd: min_eigenvalue >= -tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{excess_kurtosis, ks_statistic, mean, normal_cdf, variance};

    fn col(draws: &[Vec<f64>], j: usize) -> Vec<f64> {
        draws.iter().map(|d| d[j]).collect()
    }

    #[test]
    fn ellipsoid_1d_is_uniform() {
        let n = 200_000;
        let w = col(&sample_uniform_ellipsoid(&DMatrix::identity(1, 1), n, 1).unwrap(), 0);
        // var of U(-1, 1) is 1/3; var of the sample variance is (1/5 - 1/9)/n
        let se = ((0.2 - 1.0 / 9.0) / n as f64).sqrt();
        assert!((variance(&w) - 1.0 / 3.0).abs() < 3.0 * se);
        assert!(w.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn ellipsoid_support_and_construction() {
        let b0 = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let w = sample_uniform_ellipsoid(&b0, 20_000, 2).unwrap();
        assert!(w.iter().all(|x| 4.0 * x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-12));
        // same seed: draws are L'⁻¹ times the unit-ball draws
        let b0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = sample_uniform_ellipsoid(&b0, 50, 3).unwrap();
        let u = sample_uniform_ellipsoid(&DMatrix::identity(2, 2), 50, 3).unwrap();
        let lt = Cholesky::new(b0.clone()).unwrap().l().transpose();
        for (a, b) in w.iter().zip(&u) {
            let back = &lt * DVector::from_column_slice(a);
            assert!((back[0] - b[0]).abs() < 1e-12 && (back[1] - b[1]).abs() < 1e-12);
        }
        assert!(sample_uniform_ellipsoid(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 5, 0).is_err());
    }

    fn scalar_spec(c: f64) -> LimitShapeSpec {
        LimitShapeSpec::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1), DMatrix::identity(1, 1), c).unwrap()
    }

    #[test]
    fn qc_variance_and_mean() {
        let n = 200_000;
        for c in [0.5, 2.0, 3.0] {
            let x = col(&sample_qc(&scalar_spec(c), n, 4).unwrap(), 0);
            let var = 1.0 + c * c / 3.0;
            // fourth moment of Z + U: 3 + 6 c²/3 + c⁴/5
            let m4 = 3.0 + 2.0 * c * c + c.powi(4) / 5.0;
            let se = ((m4 - var * var) / n as f64).sqrt();
            assert!((variance(&x) - var).abs() < 3.0 * se, "c={c}");
            assert!(mean(&x).abs() < 4.0 * (var / n as f64).sqrt());
        }
    }

    #[test]
    fn qc_small_c_is_normal() {
        let x = col(&sample_qc(&scalar_spec(1e-3), 100_000, 5).unwrap(), 0);
        assert!(ks_statistic(&x, normal_cdf) < 0.01);
    }

    #[test]
    fn qc_large_c_is_platykurtic() {
        let n = 200_000;
        let x = col(&sample_qc(&scalar_spec(3.0), n, 6).unwrap(), 0);
        // exact excess kurtosis is -0.27; its standard error is below 0.01 here
        let k = excess_kurtosis(&x);
        assert!(k < -5.0 * (24.0 / n as f64).sqrt(), "{k}");
        assert!(sample_qc(&scalar_spec(0.0), 10, 0).is_err());
    }

    #[test]
    fn gap_identity_is_zero() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let g = variance_gap(&DMatrix::identity(2, 2), &v).unwrap();
        assert!(g.gap.amax() < 1e-12);
        assert!(g.psd);
    }

    #[test]
    fn gap_hand_example() {
        let g = variance_gap(
            &DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        )
        .unwrap();
        assert!((g.projection_var[(0, 0)] - 1.25).abs() < 1e-14);
        assert!((g.optimal_var[(0, 0)] - 0.8).abs() < 1e-14);
        assert!((g.gap[(0, 0)] - 0.45).abs() < 1e-14);
        assert!(g.psd);
    }

    #[test]
    fn gap_errors() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(variance_gap(&g, &DMatrix::identity(3, 3)), Err(Error::RankDeficient(_))));
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(variance_gap(&g, &bad), Err(Error::NotPositiveDefinite(_))));
        assert!(variance_gap(&DMatrix::identity(2, 3), &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn model_specs() {
        let s = LimitShapeSpec::gaussian_model(1.0, 1.0, 2.0).unwrap();
        let cov = s.gaussian_limit_cov().unwrap();
        // μ̂ and σ̂ of a normal sample: asymptotic variances σ² and σ²/2
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-12 && (cov[(1, 1)] - 0.5).abs() < 1e-12);
        let check = &s.a0 * &s.v0 * s.a0.transpose();
        assert!((check - DMatrix::identity(2, 2)).amax() < 1e-12);
        let m = LimitShapeSpec::ma2_model(Ma2Params::new(0.6, 0.2), 0.0, 1.0).unwrap();
        assert_eq!((m.k_eta(), m.k_theta()), (3, 2));
        assert!((m.b0[(0, 0)] - (1.2f64.powi(2) + 1.2f64.powi(2))).abs() < 1e-12);
    }
}
