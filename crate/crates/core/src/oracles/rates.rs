use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail behaviour of `d₂{η(z), b(θ)}` under `P_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Deviation {
    /// `P{d > u} ≤ c / (u v_T)^κ`
    Polynomial { kappa: f64 },
    /// `P{d > u} ≤ c exp{-(u v_T)^τ}`
    Exponential { tau: f64 },
}

/// Deviation bound, prior-mass exponent `D` and summary rate `v_T = T^h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationModel {
    pub deviation: Deviation,
    pub d: f64,
    pub h: f64,
}

impl DeviationModel {
    pub fn polynomial(kappa: f64, d: f64, h: f64) -> Result<Self> {
        let m = DeviationModel { deviation: Deviation::Polynomial { kappa }, d, h };
        m.validate().map(|_| m)
    }

    pub fn exponential(tau: f64, d: f64, h: f64) -> Result<Self> {
        let m = DeviationModel { deviation: Deviation::Exponential { tau }, d, h };
        m.validate().map(|_| m)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = match self.deviation {
            Deviation::Polynomial { kappa } => kappa,
            Deviation::Exponential { tau } => tau,
        };
        if !(shape > 0.0 && self.d > 0.0 && self.h > 0.0) {
            return Err(Error::Domain(format!("deviation model parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn v_t(&self, t_len: f64) -> f64 {
        t_len.powf(self.h)
    }

    /// `ρ_T⁻¹(x)`: the deviation level whose tail bound equals `x`.
    pub fn rho_inverse(&self, x: f64, v_t: f64) -> Result<f64> {
        if !(x > 0.0 && v_t > 0.0) {
            return Err(Error::Domain(format!("rho inverse needs x > 0 and v_T > 0, got {x}, {v_t}")));
        }
        match self.deviation {
            Deviation::Polynomial { kappa } => Ok(1.0 / (x.powf(1.0 / kappa) * v_t)),
            Deviation::Exponential { tau } => {
                if x >= 1.0 {
                    return Err(Error::Domain(format!("exponential inverse needs x < 1, got {x}")));
                }
                Ok((-x.ln()).powf(1.0 / tau) / v_t)
            }
        }
    }
}

/// Order of the posterior concentration rate `λ_T` and of the matching tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Human-readable form, e.g. `v_T^-0.5`.
    pub form: String,
    /// `λ_T ≍ v_T^-exponent · (log v_T)^log_power`.
    pub exponent: f64,
    pub log_power: f64,
}

impl RateReport {
    pub fn lambda_at(&self, v_t: f64) -> f64 {
        v_t.powf(-self.exponent) * v_t.ln().powf(self.log_power)
    }

    /// The matched tolerance has the same order as the rate.
    pub fn epsilon_at(&self, v_t: f64) -> f64 {
        self.lambda_at(v_t)
    }
}

pub fn concentration_rate(dev: &DeviationModel) -> Result<RateReport> {
    dev.validate()?;
    Ok(match dev.deviation {
        Deviation::Polynomial { kappa } => {
            let e = kappa / (kappa + dev.d);
            RateReport { form: format!("v_T^-{e}"), exponent: e, log_power: 0.0 }
        }
        Deviation::Exponential { tau } => {
            RateReport { form: format!("(log v_T)^{} / v_T", 1.0 / tau), exponent: 1.0, log_power: 1.0 / tau }
        }
    })
}

/// `λ_T = 4ε/3 + ρ_T⁻¹(ε^D / M)`.
pub fn lambda_t(eps: f64, dev: &DeviationModel, m: f64, v_t: f64) -> Result<f64> {
    dev.validate()?;
    if !(eps > 0.0 && m > 0.0 && v_t > 0.0) {
        return Err(Error::Domain(format!("lambda_T needs eps, M, v_T > 0, got {eps}, {m}, {v_t}")));
    }
    Ok(4.0 * eps / 3.0 + dev.rho_inverse(eps.powf(dev.d) / m, v_t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exponents() {
        let r = concentration_rate(&DeviationModel::polynomial(2.0, 2.0, 0.5).unwrap()).unwrap();
        assert_eq!(r.exponent, 0.5);
        let r = concentration_rate(&DeviationModel::polynomial(4.0, 2.0, 0.5).unwrap()).unwrap();
        assert!((r.exponent - 2.0 / 3.0).abs() < 1e-15);
        let r = concentration_rate(&DeviationModel::polynomial(1e9, 2.0, 0.5).unwrap()).unwrap();
        assert!((r.exponent - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponent_monotonicity() {
        let e = |k: f64, d: f64| concentration_rate(&DeviationModel::polynomial(k, d, 0.5).unwrap()).unwrap().exponent;
        for k in [0.5, 1.0, 2.0, 5.0] {
            assert!(e(k * 1.5, 2.0) > e(k, 2.0));
            assert!(e(k, 3.0) < e(k, 2.0));
        }
    }

    #[test]
    fn exponential_form() {
        let r = concentration_rate(&DeviationModel::exponential(2.0, 2.0, 0.5).unwrap()).unwrap();
        let v: f64 = 100.0;
        assert!((r.lambda_at(v) - v.ln().sqrt() / v).abs() < 1e-15);
    }

    #[test]
    fn worked_lambda() {
        let dev = DeviationModel::polynomial(2.0, 2.0, 0.5).unwrap();
        let l = lambda_t(0.1, &dev, 10.0, 100.0).unwrap();
        let expected = 0.4 / 3.0 + 1.0 / ((0.01f64 / 10.0).sqrt() * 100.0);
        assert!((l - expected).abs() < 1e-14);
        assert!((l - 0.4496).abs() < 1e-4);
    }

    #[test]
    fn matched_tolerance_balances_terms() {
        for (kappa, d) in [(2.0, 2.0), (4.0, 2.0), (1.0, 3.0)] {
            let dev = DeviationModel::polynomial(kappa, d, 0.5).unwrap();
            for v in [10.0, 1e3, 1e6] {
                let eps: f64 = concentration_rate(&dev).unwrap().epsilon_at(v);
                let first = 4.0 * eps / 3.0;
                let second = lambda_t(eps, &dev, 1.0, v).unwrap() - first;
                let ratio = first / second;
                assert!((1.0 / 3.0..=3.0).contains(&ratio), "{ratio}");
            }
        }
    }

    #[test]
    fn second_term_scales_with_m() {
        // ρ⁻¹(ε^D / M) = M^{1/κ} / (ε^{D/κ} v_T): grows with M, vanishes as M → 0
        let dev = DeviationModel::polynomial(2.0, 2.0, 0.5).unwrap();
        let second = |m: f64| lambda_t(0.1, &dev, m, 100.0).unwrap() - 0.4 / 3.0;
        assert!((second(40.0) / second(10.0) - 2.0).abs() < 1e-12);
        assert!(second(1e-14) < 1e-6);
    }

    #[test]
    fn bad_inputs() {
        assert!(DeviationModel::polynomial(0.0, 2.0, 0.5).is_err());
        assert!(DeviationModel::exponential(1.0, -2.0, 0.5).is_err());
        let dev = DeviationModel::polynomial(2.0, 2.0, 0.5).unwrap();
        assert!(lambda_t(0.0, &dev, 1.0, 10.0).is_err());
        assert!(lambda_t(0.1, &dev, -1.0, 10.0).is_err());
        let dev = DeviationModel::exponential(1.0, 2.0, 0.5).unwrap();
        assert!(lambda_t(0.1, &dev, 1e-3, 10.0).is_err());
        assert!(lambda_t(0.1, &dev, 1.0, 10.0).is_ok());
    }
}
