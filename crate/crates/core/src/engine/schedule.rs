use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the tolerance (or retained quantile) shrinks with the sample size `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "kebab-case")]
pub enum ToleranceSchedule {
    FixedEps {
        eps: f64,
    },
    /// `ε_T = c T^-γ`
    PowerEps {
        c: f64,
        gamma: f64,
    },
    /// `α_T = T^-p`
    PowerQuantile {
        p: f64,
    },
}

impl ToleranceSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ToleranceSchedule::FixedEps { eps } => eps >= 0.0 && eps.is_finite(),
            ToleranceSchedule::PowerEps { c, gamma } => c > 0.0 && gamma > 0.0 && c.is_finite() && gamma.is_finite(),
            ToleranceSchedule::PowerQuantile { p } => p > 0.0 && p.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid schedule parameters: {self:?}")))
        }
    }

    pub fn is_quantile(&self) -> bool {
        matches!(self, ToleranceSchedule::PowerQuantile { .. })
    }

    /// Short label used in tables, e.g. `eps=T^-0.4` or `alpha=T^-1.5`.
    pub fn label(&self) -> String {
        match *self {
            ToleranceSchedule::FixedEps { eps } => format!("eps={eps}"),
            ToleranceSchedule::PowerEps { c, gamma } if c == 1.0 => format!("eps=T^-{gamma}"),
            ToleranceSchedule::PowerEps { c, gamma } => format!("eps={c}*T^-{gamma}"),
            ToleranceSchedule::PowerQuantile { p } => format!("alpha=T^-{p}"),
        }
    }
}

fn check_t(t_len: usize) -> Result<f64> {
    if t_len < 2 {
        return Err(Error::Size(format!("schedules need T >= 2, got {t_len}")));
    }
    Ok(t_len as f64)
}

pub fn epsilon_from_schedule(s: &ToleranceSchedule, t_len: usize) -> Result<f64> {
    let t = check_t(t_len)?;
    s.validate()?;
    match *s {
        ToleranceSchedule::FixedEps { eps } => Ok(eps),
        ToleranceSchedule::PowerEps { c, gamma } => Ok(c * t.powf(-gamma)),
        ToleranceSchedule::PowerQuantile { .. } => {
            Err(Error::Config("a quantile schedule has no tolerance; use alpha_from_schedule".into()))
        }
    }
}

pub fn alpha_from_schedule(s: &ToleranceSchedule, t_len: usize) -> Result<f64> {
    let t = check_t(t_len)?;
    s.validate()?;
    match *s {
        ToleranceSchedule::PowerQuantile { p } => Ok(t.powf(-p)),
        _ => Err(Error::Config("a tolerance schedule has no quantile; use epsilon_from_schedule".into())),
    }
}
