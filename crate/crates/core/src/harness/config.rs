//! JSON run configurations and their translation into replication studies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{
    alpha_from_schedule, epsilon_from_schedule, retained_count, ModelSimulator, ModelSpec, ReplicationStudy,
    SamplingPlan, SimulationPath, ToleranceSchedule,
};
use crate::error::{Error, Result};
use crate::models::{GaussianModel, InnovationLaw, Ma2Model, PriorRegion, ToyModel};
use crate::summaries::{DistanceSpec, SummaryMap};

/// Default ceiling on `R × N`, the simulations a run may request.
pub const DEFAULT_BUDGET_CAP: u128 = 1_000_000_000_000;
/// Default stream length bound for "retain K" tolerance runs.
pub const DEFAULT_MAX_N: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Ma2 {
        #[serde(default)]
        innovation: InnovationLaw,
    },
    Gaussian,
    Toy {
        curvature: f64,
    },
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        match *self {
            ModelConfig::Ma2 { innovation } => ModelSpec::Ma2(Ma2Model::new(innovation)),
            ModelConfig::Gaussian => ModelSpec::Gaussian(GaussianModel),
            ModelConfig::Toy { curvature } => ModelSpec::Toy(ToyModel::new(curvature)),
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.spec().as_model().param_names()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Everything a replication study needs, as read from JSON.
///
/// Exactly one of `n` (fixed proposal count) and `retain_k` (derive the proposal count
/// from the number of draws to keep) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub theta0: Vec<f64>,
    #[serde(alias = "T")]
    pub t_len: usize,
    pub summary: String,
    #[serde(default)]
    pub distance: DistanceSpec,
    pub prior: PriorRegion,
    #[serde(alias = "schedule")]
    pub schedules: OneOrMany<ToleranceSchedule>,
    #[serde(default, alias = "N")]
    pub n: Option<u64>,
    #[serde(default, alias = "retain-K", alias = "retain_K")]
    pub retain_k: Option<usize>,
    /// Stream bound for "retain K" tolerance runs.
    #[serde(default)]
    pub max_n: Option<u64>,
    #[serde(alias = "R")]
    pub r: u64,
    pub seed: u64,
    #[serde(default)]
    pub path: SimulationPath,
    /// Moment screen width for tolerance runs; omit to simulate every proposal.
    #[serde(default)]
    pub screen_sigmas: Option<f64>,
    #[serde(default)]
    pub budget_cap: Option<u128>,
}

/// Proposal counts implied by a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Per schedule: proposals per replication (an upper bound for "retain K" tolerance runs).
    pub n_per_schedule: Vec<u64>,
    /// Length of the shared proposal stream per replication.
    pub n_per_rep: u64,
    pub total: u128,
    /// Whether `total` is exact or only an upper bound.
    pub exact: bool,
}

/// `N = ⌈K/α⌉`, refusing results that do not fit in `u64`.
pub fn n_for_retained(k: usize, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("quantile alpha must lie in (0, 1], got {alpha}")));
    }
    let n = (k as f64 / alpha * (1.0 - 1e-12)).ceil();
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(Error::BudgetExceeded { requested: u128::MAX, cap: u64::MAX as u128 });
    }
    Ok((n as u64).max(k as u64))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn schedules(&self) -> Vec<ToleranceSchedule> {
        self.schedules.to_vec()
    }

    pub fn labels(&self) -> Vec<String> {
        self.schedules().iter().map(|s| s.label()).collect()
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.model.param_names()
    }

    pub fn summary_map(&self) -> Result<SummaryMap> {
        SummaryMap::parse(&self.summary)
    }

    pub fn validate(&self) -> Result<()> {
        let schedules = self.schedules();
        if schedules.is_empty() {
            return Err(Error::Config("at least one schedule is required".into()));
        }
        for s in &schedules {
            s.validate()?;
        }
        let quantile = schedules.iter().filter(|s| s.is_quantile()).count();
        if quantile != 0 && quantile != schedules.len() {
            return Err(Error::Config("tolerance and quantile schedules cannot share a run".into()));
        }
        match (self.n, self.retain_k) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("set exactly one of `n` and `retain_k`".into()))
            }
            (Some(0), _) | (_, Some(0)) => return Err(Error::Config("`n` and `retain_k` must be positive".into())),
            _ => {}
        }
        if self.r == 0 {
            return Err(Error::Config("R must be at least 1".into()));
        }
        let summary = self.summary_map()?;
        self.distance.validate(summary.dim())?;
        self.prior.validate()?;
        let spec = self.model.spec();
        if self.prior.dim() != spec.as_model().param_dim() || self.theta0.len() != spec.as_model().param_dim() {
            return Err(Error::Shape(format!(
                "model has {} parameters; theta0 has {} and the prior {}",
                spec.as_model().param_dim(),
                self.theta0.len(),
                self.prior.dim()
            )));
        }
        spec.as_model().check_params(&self.theta0)?;
        if let ModelConfig::Ma2 { innovation } = self.model {
            innovation.validate()?;
        }
        if let Some(k) = self.screen_sigmas {
            if !(k > 0.0) {
                return Err(Error::Config(format!("screen_sigmas must be positive, got {k}")));
            }
        }
        Ok(())
    }

    pub fn is_quantile(&self) -> bool {
        self.schedules().iter().all(|s| s.is_quantile())
    }

    /// The per-replication sampling plan at this configuration's `T`.
    pub fn plan(&self) -> Result<SamplingPlan> {
        let t = self.t_len;
        let schedules = self.schedules();
        if self.is_quantile() {
            let alphas = schedules.iter().map(|s| alpha_from_schedule(s, t)).collect::<Result<Vec<_>>>()?;
            let runs = match (self.n, self.retain_k) {
                (Some(n), _) => alphas.iter().map(|&a| Ok((retained_count(a, n)?, n))).collect::<Result<Vec<_>>>()?,
                (None, Some(k)) => {
                    alphas.iter().map(|&a| Ok((k, n_for_retained(k, a)?))).collect::<Result<Vec<_>>>()?
                }
                (None, None) => unreachable!("validated"),
            };
            Ok(SamplingPlan::KnnPrefixes { runs })
        } else {
            let eps = schedules.iter().map(|s| epsilon_from_schedule(s, t)).collect::<Result<Vec<_>>>()?;
            Ok(match (self.n, self.retain_k) {
                (Some(n), _) => SamplingPlan::Reject { eps, n },
                (None, Some(k)) => SamplingPlan::RejectFirstK { eps, k, max_n: self.max_n.unwrap_or(DEFAULT_MAX_N) },
                (None, None) => unreachable!("validated"),
            })
        }
    }

    pub fn budget(&self) -> Result<Budget> {
        let plan = self.plan()?;
        let (n_per_schedule, exact) = match &plan {
            SamplingPlan::Reject { eps, n } => (vec![*n; eps.len()], true),
            SamplingPlan::Knn { n, .. } => (vec![*n], true),
            SamplingPlan::RejectFirstK { eps, max_n, .. } => (vec![*max_n; eps.len()], false),
            SamplingPlan::KnnPrefixes { runs } => (runs.iter().map(|r| r.1).collect(), true),
        };
        let n_per_rep = plan.max_proposals();
        let total = (n_per_rep as u128)
            .checked_mul(self.r as u128)
            .ok_or(Error::BudgetExceeded { requested: u128::MAX, cap: self.cap() })?;
        Ok(Budget { n_per_schedule, n_per_rep, total, exact })
    }

    pub fn cap(&self) -> u128 {
        self.budget_cap.unwrap_or(DEFAULT_BUDGET_CAP)
    }

    /// Errors before any simulation when the budget exceeds the cap.
    pub fn check_budget(&self) -> Result<Budget> {
        let b = self.budget()?;
        if b.total > self.cap() {
            return Err(Error::BudgetExceeded { requested: b.total, cap: self.cap() });
        }
        Ok(b)
    }

    pub fn simulator(&self) -> Result<ModelSimulator> {
        Ok(ModelSimulator::new(self.model.spec(), self.summary_map()?, self.t_len)?.with_path(self.path))
    }

    pub fn study(&self) -> Result<ReplicationStudy> {
        self.validate()?;
        Ok(ReplicationStudy {
            simulator: self.simulator()?,
            theta0: self.theta0.clone(),
            prior: self.prior.clone(),
            distance: self.distance.clone(),
            plan: self.plan()?,
            screen_sigmas: self.screen_sigmas,
        })
    }

    /// Same configuration at another sample size.
    pub fn with_t(&self, t_len: usize) -> Self {
        RunConfig { t_len, ..self.clone() }
    }
}

/// `(N per replication, total simulations)` for a "retain K" quantile configuration.
pub fn derive_budget(cfg: &RunConfig) -> Result<(u64, u128)> {
    if cfg.retain_k.is_none() {
        return Err(Error::Config("derive_budget applies to retain-K configurations".into()));
    }
    let b = cfg.budget()?;
    Ok((b.n_per_rep, b.total))
}
