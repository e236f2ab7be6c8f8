use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::{Model, TimeSeries};
use crate::error::{Error, Result};
use crate::seed::SimRng;

/// Moving-average coefficients of `y_t = e_t + θ1 e_{t-1} + θ2 e_{t-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ma2Params {
    pub theta1: f64,
    pub theta2: f64,
}

impl Ma2Params {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Ma2Params { theta1, theta2 }
    }

    /// Membership in the invertibility triangle with vertices (-2, 1), (2, 1), (0, -1).
    pub fn in_region(&self) -> bool {
        let (t1, t2) = (self.theta1, self.theta2);
        (-2.0..=2.0).contains(&t1) && t1 + t2 >= -1.0 && t1 - t2 <= 1.0 && t2 <= 1.0
    }

    pub fn check(&self) -> Result<()> {
        if self.in_region() {
            Ok(())
        } else {
            Err(Error::RegionViolation { region: "MA(2) invertibility", params: vec![self.theta1, self.theta2] })
        }
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.theta1, self.theta2]
    }
}

impl From<&[f64]> for Ma2Params {
    fn from(v: &[f64]) -> Self {
        Ma2Params::new(v[0], v[1])
    }
}

/// Law of the innovations `e_t`. All variants have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum InnovationLaw {
    #[default]
    StandardNormal,
    /// Student-t with `dof > 4` degrees of freedom rescaled to unit variance.
    StudentT { dof: f64 },
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

impl InnovationLaw {
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "standard-normal" || name == "normal" {
            return Ok(InnovationLaw::StandardNormal);
        }
        if name == "uniform" {
            return Ok(InnovationLaw::Uniform);
        }
        if let Some(dof) = name.strip_prefix("student-t:") {
            let dof: f64 = dof.parse().map_err(|_| Error::Config(format!("bad degrees of freedom in `{name}`")))?;
            let law = InnovationLaw::StudentT { dof };
            law.validate()?;
            return Ok(law);
        }
        Err(Error::Config(format!(
            "unknown innovation law `{name}` (expected standard-normal, uniform or student-t:<dof>)"
        )))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            // A finite 4 + delta moment is needed for the autocovariance CLT.
            InnovationLaw::StudentT { dof } if dof.is_nan() || dof <= 4.0 => {
                Err(Error::Config(format!("student-t innovations need dof > 4, got {dof}")))
            }
            _ => Ok(()),
        }
    }

    /// Excess kurtosis `E e^4 - 3`.
    pub fn excess_kurtosis(&self) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => 0.0,
            InnovationLaw::StudentT { dof } => 6.0 / (dof - 4.0),
            InnovationLaw::Uniform => -1.2,
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => StandardNormal.sample(rng),
            InnovationLaw::StudentT { dof } => {
                let t: f64 = StudentT::new(dof).expect("dof > 4").sample(rng);
                t * ((dof - 2.0) / dof).sqrt()
            }
            InnovationLaw::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Second-order moving-average model with a stationary start: `e_0` and `e_{-1}` are
/// drawn from the innovation law, so every `y_t` has the same distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Ma2Model {
    pub innovation: InnovationLaw,
}

impl Ma2Model {
    pub fn new(innovation: InnovationLaw) -> Self {
        Ma2Model { innovation }
    }

    /// Streams `y_1..y_T` to `sink` without storing the series.
    #[inline]
    pub(crate) fn stream<F: FnMut(f64)>(&self, theta: &[f64], t_len: usize, rng: &mut SimRng, mut sink: F) {
        let (t1, t2) = (theta[0], theta[1]);
        let law = self.innovation;
        let mut e2 = law.sample(rng); // e_{t-2}
        let mut e1 = law.sample(rng); // e_{t-1}
        for _ in 0..t_len {
            let e = law.sample(rng);
            sink(e + t1 * e1 + t2 * e2);
            e2 = e1;
            e1 = e;
        }
    }
}

impl Model for Ma2Model {
    fn name(&self) -> &'static str {
        "ma2"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["theta1", "theta2"]
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        Ma2Params::from(theta).check()
    }

    fn min_len(&self) -> usize {
        3
    }

    fn simulate_into(&self, theta: &[f64], t_len: usize, rng: &mut SimRng, out: &mut Vec<f64>) {
        out.clear();
        self.stream(theta, t_len, rng, |y| out.push(y));
    }
}

/// `y_t = e_t + θ1 e_{t-1} + θ2 e_{t-2}` with standard normal innovations.
pub fn simulate_ma2(params: Ma2Params, t_len: usize, seed: u64) -> Result<TimeSeries> {
    Ma2Model::default().simulate(&params.as_vec(), t_len, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn white_noise_case_reproduces_innovations() {
        let y = simulate_ma2(Ma2Params::new(0.0, 0.0), 50, 11).unwrap();
        let mut rng = rng_from_seed(11);
        let law = InnovationLaw::StandardNormal;
        let _ = (law.sample(&mut rng), law.sample(&mut rng));
        let e: Vec<f64> = (0..50).map(|_| law.sample(&mut rng)).collect();
        assert_eq!(y.values, e);
    }

    #[test]
    fn recursion_holds_exactly() {
        let p = Ma2Params::new(0.6, 0.2);
        let y = simulate_ma2(p, 20, 3).unwrap();
        let mut rng = rng_from_seed(3);
        let e: Vec<f64> = (0..22).map(|_| InnovationLaw::StandardNormal.sample(&mut rng)).collect();
        for t in 0..20 {
            let expect = e[t + 2] + 0.6 * e[t + 1] + 0.2 * e[t];
            assert_eq!(y.values[t], expect);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = Ma2Params::new(0.6, 0.2);
        assert_eq!(simulate_ma2(p, 100, 9).unwrap(), simulate_ma2(p, 100, 9).unwrap());
        assert_ne!(simulate_ma2(p, 100, 9).unwrap().values, simulate_ma2(p, 100, 10).unwrap().values);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(simulate_ma2(Ma2Params::new(1.5, 0.0), 10, 1), Err(Error::RegionViolation { .. })));
        assert!(matches!(simulate_ma2(Ma2Params::new(0.1, 0.1), 2, 1), Err(Error::Size(_))));
        // theta2 above 1 is excluded by the bounded triangle.
        assert!(!Ma2Params::new(0.0, 1.2).in_region());
        assert!(Ma2Params::new(0.0, 1.0).in_region());
        assert!(Ma2Params::new(2.0, 1.0).in_region());
    }

    #[test]
    fn innovation_laws_are_standardized() {
        let mut rng = rng_from_seed(5);
        for law in [InnovationLaw::StandardNormal, InnovationLaw::StudentT { dof: 8.0 }, InnovationLaw::Uniform] {
            let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
            let m = crate::stats::mean(&xs);
            let v = crate::stats::variance(&xs);
            assert!(m.abs() < 0.01, "{law:?} mean {m}");
            assert!((v - 1.0).abs() < 0.03, "{law:?} var {v}");
        }
        assert!(InnovationLaw::parse("student-t:3").is_err());
        assert_eq!(InnovationLaw::parse("student-t:6").unwrap(), InnovationLaw::StudentT { dof: 6.0 });
    }
}
