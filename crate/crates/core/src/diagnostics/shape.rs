use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::PosteriorSample;
use crate::error::{Error, Result};
use crate::oracles::{sample_qc, LimitShapeSpec};
use crate::stats::{
    ks_critical, ks_statistic, ks_two_sample, lilliefors_critical, lilliefors_statistic, variance, Level,
};

pub const MIN_SHAPE_DRAWS: usize = 200;
/// Size of the `Q_c` reference sample used by the two-sample test.
pub const QC_REFERENCE_DRAWS: usize = 100_000;
const QC_REFERENCE_SEED: u64 = 0x51a9e_0f_9c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeRegime {
    /// `v_T ε_T → ∞`: `ε⁻¹(θ − θ₀)` uniform on `{w : w'B₀w ≤ 1}`.
    Uniform,
    /// `v_T ε_T → c`: `Σ_T{G₀(θ − θ₀) − (η(y) − b₀)}` follows `Q_c`.
    Qc,
    /// `v_T ε_T → 0`: Gaussian.
    Gaussian,
}

impl ShapeRegime {
    pub const ALL: [ShapeRegime; 3] = [ShapeRegime::Uniform, ShapeRegime::Qc, ShapeRegime::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            ShapeRegime::Uniform => "uniform",
            ShapeRegime::Qc => "qc",
            ShapeRegime::Gaussian => "gaussian",
        }
    }
}

/// Goodness-of-fit of a set of vectors to one regime's reference law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTest {
    pub regime: ShapeRegime,
    /// One KS statistic per test (radial for the uniform regime, per coordinate otherwise).
    pub statistics: Vec<f64>,
    pub critical_1pct: Vec<f64>,
    pub passes_1pct: bool,
}

/// Tests vectors already expressed in the regime's coordinates:
/// - uniform: radial statistic `(w'B₀w)^{k/2}` is `U(0, 1)`, one-sample KS;
/// - qc: each coordinate against an independent `Q_c` reference, two-sample KS;
/// - gaussian: each coordinate against a fitted normal, Lilliefors.
pub fn regime_test(regime: ShapeRegime, xs: &[Vec<f64>], spec: &LimitShapeSpec) -> Result<RegimeTest> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Size("regime tests need at least two vectors".into()));
    }
    let k = xs[0].len();
    let (statistics, critical_1pct): (Vec<f64>, Vec<f64>) = match regime {
        ShapeRegime::Uniform => {
            if k != spec.k_theta() {
                return Err(Error::Shape(format!("uniform regime expects {} coordinates", spec.k_theta())));
            }
            let radial: Vec<f64> = xs
                .iter()
                .map(|w| {
                    let v = DVector::from_column_slice(w);
                    (v.transpose() * &spec.b0 * &v)[(0, 0)].powf(k as f64 / 2.0)
                })
                .collect();
            (vec![ks_statistic(&radial, |r| r.clamp(0.0, 1.0))], vec![ks_critical(n, Level::OnePercent)])
        }
        ShapeRegime::Qc => {
            if k != spec.k_eta() {
                return Err(Error::Shape(format!("Q_c regime expects {} coordinates", spec.k_eta())));
            }
            let reference = sample_qc(spec, QC_REFERENCE_DRAWS, QC_REFERENCE_SEED)?;
            let m = reference.len() as f64;
            let crit = 1.628 * ((n as f64 + m) / (n as f64 * m)).sqrt();
            (0..k)
                .map(|j| {
                    let a: Vec<f64> = xs.iter().map(|x| x[j]).collect();
                    let b: Vec<f64> = reference.iter().map(|x| x[j]).collect();
                    (ks_two_sample(&a, &b), crit)
                })
                .unzip()
        }
        ShapeRegime::Gaussian => (0..k)
            .map(|j| {
                let a: Vec<f64> = xs.iter().map(|x| x[j]).collect();
                (lilliefors_statistic(&a), lilliefors_critical(n, Level::OnePercent))
            })
            .unzip(),
    };
    let passes_1pct = statistics.iter().zip(&critical_1pct).all(|(s, c)| s <= c);
    Ok(RegimeTest { regime, statistics, critical_1pct, passes_1pct })
}

/// Quantities the standardizations need besides the sample.
#[derive(Debug, Clone, Copy)]
pub struct ShapeContext<'a> {
    pub theta0: &'a [f64],
    /// `b(θ₀)`.
    pub b0: &'a [f64],
    /// `η(y)`.
    pub observed: &'a [f64],
    pub eps: f64,
    pub v_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub test: RegimeTest,
    pub n: usize,
    /// Per parameter: posterior variance over the Gaussian-limit variance
    /// `[(G₀'V₀⁻¹G₀)⁻¹]_jj / v_T²`.
    pub variance_ratio: Vec<f64>,
}

/// Standardizes the draws as the regime prescribes and tests them against its limit law.
pub fn shape_report(
    sample: &PosteriorSample,
    spec: &LimitShapeSpec,
    regime: ShapeRegime,
    ctx: &ShapeContext<'_>,
) -> Result<ShapeReport> {
    let n = sample.len();
    if n < MIN_SHAPE_DRAWS {
        return Err(Error::Size(format!("shape reports need at least {MIN_SHAPE_DRAWS} draws, got {n}")));
    }
    let k_theta = spec.k_theta();
    if sample.dim() != k_theta || ctx.theta0.len() != k_theta {
        return Err(Error::Shape(format!("expected {k_theta}-dimensional draws")));
    }
    let draws = sample.draws();
    let xs: Vec<Vec<f64>> = match regime {
        ShapeRegime::Uniform => {
            draws.iter().map(|t| t.iter().zip(ctx.theta0).map(|(a, b)| (a - b) / ctx.eps).collect()).collect()
        }
        ShapeRegime::Gaussian => draws,
        ShapeRegime::Qc => {
            let offset = DVector::from_iterator(ctx.b0.len(), ctx.observed.iter().zip(ctx.b0).map(|(y, b)| y - b));
            let scale: DMatrix<f64> = &spec.a0 * ctx.v_t;
            draws
                .iter()
                .map(|t| {
                    let d = DVector::from_iterator(k_theta, t.iter().zip(ctx.theta0).map(|(a, b)| a - b));
                    let x = &scale * (&spec.jacobian * d - &offset);
                    x.iter().copied().collect()
                })
                .collect()
        }
    };
    let test = regime_test(regime, &xs, spec)?;
    let limit = spec.gaussian_limit_cov()?;
    let variance_ratio =
        (0..k_theta).map(|j| variance(&sample.column(j)) / (limit[(j, j)] / (ctx.v_t * ctx.v_t))).collect();
    Ok(ShapeReport { test, n, variance_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{sample_gaussian, sample_uniform_ellipsoid};
    use crate::stats::ks_critical as kc;

    #[test]
    fn uniform_self_consistency() {
        // ≥ 90% of synthetic ellipsoid samples pass at 5%
        let spec = LimitShapeSpec::gaussian_model(1.0, 1.0, 2.0).unwrap();
        let passes = (0..100u64)
            .filter(|&s| {
                let w = sample_uniform_ellipsoid(&spec.b0, 300, s).unwrap();
                let t = regime_test(ShapeRegime::Uniform, &w, &spec).unwrap();
                t.statistics[0] <= kc(300, Level::FivePercent)
            })
            .count();
        assert!(passes >= 90, "{passes}");
    }

    #[test]
    fn references_are_mutually_distinguishable() {
        let spec = LimitShapeSpec::gaussian_model(1.0, 1.0, 2.0).unwrap();
        let n = 10_000;
        let samples = [
            (ShapeRegime::Uniform, sample_uniform_ellipsoid(&spec.b0, n, 1).unwrap()),
            (ShapeRegime::Qc, sample_qc(&spec, n, 2).unwrap()),
            (ShapeRegime::Gaussian, sample_gaussian(2, n, 3)),
        ];
        for (own, xs) in &samples {
            assert!(regime_test(*own, xs, &spec).unwrap().passes_1pct, "{own:?} rejected by its own test");
            let rejected_elsewhere =
                ShapeRegime::ALL.iter().filter(|r| *r != own).any(|r| !regime_test(*r, xs, &spec).unwrap().passes_1pct);
            assert!(rejected_elsewhere, "{own:?} not rejected by any other test");
        }
    }

    #[test]
    fn too_few_draws() {
        let spec = LimitShapeSpec::gaussian_model(1.0, 1.0, 2.0).unwrap();
        let s = PosteriorSample {
            particles: vec![],
            realized_epsilon: 0.0,
            acceptance_rate: 0.0,
            n_proposals: 1,
            n_simulated: 1,
            schedule_desc: String::new(),
        };
        let ctx = ShapeContext { theta0: &[1.0, 1.0], b0: &[1.0, 1.0], observed: &[1.0, 1.0], eps: 0.1, v_t: 10.0 };
        assert!(matches!(shape_report(&s, &spec, ShapeRegime::Gaussian, &ctx), Err(Error::Size(_))));
    }
}
