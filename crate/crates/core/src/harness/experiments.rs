//! Registered experiment recipes, each reproducing one table or figure end to end.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, OneOrMany, RunConfig};
use super::io::{Cell, OutputDir, Table};
use super::studies::{
    run_study, DiagConfig, DiagOptions, DiagStudy, FailureNote, SlopeOptions, StageStats, StudyResult,
};
use crate::diagnostics::{fit_log_slope, log_grid, SlopeFit, SlopeRegime};
use crate::engine::{
    acceptance_rates, run_replications, AbcProblem, IdentitySource, SimulationPath, ToleranceSchedule,
};
use crate::error::{Error, Result};
use crate::models::{InnovationLaw, PriorRegion};
use crate::oracles::{variance_gap, VarianceGap};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{mean, ols_line, std_dev};
use crate::summaries::{DistanceSpec, SummaryVector};

pub const DEFAULT_SEED: u64 = 20_190_101;

/// Which recipe to run and the overrides applied to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub t_values: Option<Vec<usize>>,
    #[serde(default)]
    pub r: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub retain_k: Option<usize>,
    /// Proposals per grid point (slope) or per replication (fixed-N overrides).
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub budget_cap: Option<u128>,
}

impl ExperimentSpec {
    pub fn new(name: &str) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            t_values: None,
            r: None,
            seed: DEFAULT_SEED,
            retain_k: None,
            n: None,
            budget_cap: None,
        }
    }

    fn t_or(&self, default: &[usize]) -> Vec<usize> {
        self.t_values.clone().unwrap_or_else(|| default.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub curvature: f64,
    pub eps: f64,
    /// Replication mean of `E_Π[θ] − b⁻¹(η(y))`.
    pub bias: f64,
    pub se: f64,
    /// `−a ε² / (1 + 2aθ₀)²`.
    pub predicted: f64,
    pub within_3se: bool,
    /// Replication mean of `E_Π[θ] − θ₀`, for reference.
    pub raw_bias: f64,
    pub raw_se: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub t_len: usize,
    pub theta0: f64,
    pub retain_k: usize,
    pub rows: Vec<BiasRow>,
    /// Per curvature with a nonzero bias: slope and standard error of `log|bias|` on `log ε`.
    pub slopes: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub instances: usize,
    pub psd: usize,
    pub smallest_eigenvalue: f64,
    pub hand: VarianceGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentResult {
    Study { result: StudyResult },
    Studies { parts: Vec<(String, StudyResult)> },
    Slopes { parts: Vec<(String, StudyResult)>, analytic: SlopeFit },
    Bias { report: BiasReport },
    Gap { report: GapReport },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub result: ExperimentResult,
    pub stages: Vec<StageStats>,
    pub failures: Vec<FailureNote>,
    /// Choices recorded alongside the outputs (estimators, grids, scales).
    pub notes: Vec<String>,
    #[serde(skip)]
    pub summary: Option<Table>,
}

impl ExperimentRun {
    pub fn check(&self) -> Result<()> {
        match self.failures.iter().max_by_key(|f| f.empty) {
            Some(f) => Err(Error::PartialFailure { failed: f.empty, total: f.total }),
            None => Ok(()),
        }
    }
}

type RecipeFn = fn(&ExperimentSpec, &mut OutputDir) -> Result<ExperimentRun>;

pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    run: RecipeFn,
}

pub const EXPERIMENTS: &[Recipe] = &[
    Recipe {
        name: "fig-s1-concentration",
        description: "MA(2) posterior mass outside a 0.15-ball for T in {500, 1000, 5000}, eps = T^-0.4",
        run: concentration,
    },
    Recipe {
        name: "fig-s2-s3-shape",
        description: "Gaussian model at T = 1000: limit-shape tests under three tolerance schedules",
        run: shape,
    },
    Recipe {
        name: "fig1-table1-rmse",
        description: "Gaussian model at T = 100: density RMSE of four quantile schedules against the exact posterior",
        run: rmse,
    },
    Recipe {
        name: "table-s2-coverage",
        description: "MA(2) credible-interval width and coverage, T in {500, 1000}, R = 1000",
        run: coverage,
    },
    Recipe {
        name: "fig-s4-s5-mean",
        description: "MA(2) posterior-mean normality and bias at T = 500, R = 1000",
        run: posterior_mean,
    },
    Recipe {
        name: "slope-corollary1",
        description: "log-log acceptance-rate slopes in both tolerance regimes (MA(2), Gaussian, 1-D analytic)",
        run: slopes,
    },
    Recipe {
        name: "bias-theorem3",
        description: "scalar toy model: posterior-mean bias against the quadratic prediction at three tolerances",
        run: bias,
    },
    Recipe {
        name: "gap-theorem4",
        description: "variance gap between summary matching and the efficient estimator on random instances",
        run: gap,
    },
];

pub fn registered_names() -> Vec<&'static str> {
    EXPERIMENTS.iter().map(|r| r.name).collect()
}

pub fn find_recipe(name: &str) -> Result<&'static Recipe> {
    EXPERIMENTS
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::UnknownExperiment { name: name.to_string(), registered: registered_names().join(", ") })
}

pub fn run_experiment(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    (find_recipe(&spec.name)?.run)(spec, out)
}

const MA2_THETA0: [f64; 2] = [0.6, 0.2];
const GAUSSIAN_BOX: [(f64, f64); 2] = [(0.5, 1.5), (0.5, 1.5)];

fn power_eps(gammas: &[f64]) -> OneOrMany<ToleranceSchedule> {
    OneOrMany::Many(gammas.iter().map(|&gamma| ToleranceSchedule::PowerEps { c: 1.0, gamma }).collect())
}

fn ma2_config(spec: &ExperimentSpec, t_len: usize, gammas: &[f64], r: u64) -> RunConfig {
    RunConfig {
        model: ModelConfig::Ma2 { innovation: InnovationLaw::StandardNormal },
        theta0: MA2_THETA0.to_vec(),
        t_len,
        summary: "autocov:2".into(),
        distance: DistanceSpec::Euclidean,
        prior: PriorRegion::TriangleMa2,
        schedules: power_eps(gammas),
        n: None,
        retain_k: Some(spec.retain_k.unwrap_or(100)),
        max_n: None,
        r: spec.r.unwrap_or(r),
        seed: spec.seed,
        path: SimulationPath::Data,
        screen_sigmas: Some(crate::engine::DEFAULT_SCREEN_SIGMAS),
        budget_cap: spec.budget_cap,
    }
}

fn gaussian_config(
    spec: &ExperimentSpec,
    t_len: usize,
    schedules: OneOrMany<ToleranceSchedule>,
    k: usize,
    r: u64,
) -> RunConfig {
    RunConfig {
        model: ModelConfig::Gaussian,
        theta0: vec![1.0, 1.0],
        t_len,
        summary: "mean_var".into(),
        distance: DistanceSpec::Euclidean,
        prior: PriorRegion::unit_box(&GAUSSIAN_BOX),
        schedules,
        n: None,
        retain_k: Some(spec.retain_k.unwrap_or(k)),
        max_n: None,
        r: spec.r.unwrap_or(r),
        seed: spec.seed,
        path: SimulationPath::Sufficient,
        screen_sigmas: Some(crate::engine::DEFAULT_SCREEN_SIGMAS),
        budget_cap: spec.budget_cap,
    }
}

fn single_study(study: DiagStudy, cfg: DiagConfig, out: &mut OutputDir, notes: Vec<String>) -> Result<ExperimentRun> {
    let run = run_study(study, &cfg, out)?;
    Ok(ExperimentRun {
        result: ExperimentResult::Study { result: run.result },
        stages: run.stages,
        failures: run.failures,
        notes,
        summary: run.summary,
    })
}

fn concentration(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[500, 1000, 5000]);
    let run = ma2_config(spec, t[0], &[0.4], 20);
    let cfg = DiagConfig { run, diag: DiagOptions { t_values: Some(t), delta: 0.15, ..DiagOptions::default() } };
    single_study(DiagStudy::Concentration, cfg, out, vec!["retained draws per replication: 100".into()])
}

fn shape(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[1000])[0];
    let run = gaussian_config(spec, t, power_eps(&[0.4, 0.5, 0.55]), 250, 200);
    let cfg = DiagConfig { run, diag: DiagOptions::default() };
    single_study(
        DiagStudy::Shape,
        cfg,
        out,
        vec![
            "uniform regime: radial KS of eps^-1 (theta - theta0) against U(0,1)".into(),
            "qc regime: per-coordinate two-sample KS against 1e5 reference draws, c = v_T eps".into(),
            "gaussian regime: per-coordinate Lilliefors test at 1%".into(),
        ],
    )
}

fn rmse(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[100])[0];
    let schedules =
        OneOrMany::Many([1.1, 1.5, 2.0, 2.5].iter().map(|&p| ToleranceSchedule::PowerQuantile { p }).collect());
    let run = gaussian_config(spec, t, schedules, 100, 20);
    let cfg = DiagConfig { run, diag: DiagOptions::default() };
    single_study(
        DiagStudy::Rmse,
        cfg,
        out,
        vec![
            "density estimator: Gaussian KDE, Silverman bandwidth 1.06 sd n^-1/5".into(),
            "grid: exact posterior marginals on 512 points over the prior box, KDE evaluated on the same points".into(),
            "scale: R = 20 and 100 retained draws (the published study used R = 50 and 250)".into(),
        ],
    )
}

fn coverage(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[500, 1000]);
    let run = ma2_config(spec, t[0], &[0.4, 0.5, 0.55], 1000);
    let cfg = DiagConfig { run, diag: DiagOptions { t_values: Some(t), level: 0.95, ..DiagOptions::default() } };
    single_study(DiagStudy::Coverage, cfg, out, vec!["95% equal-tailed intervals from type-7 quantiles".into()])
}

fn posterior_mean(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[500]);
    let run = ma2_config(spec, t[0], &[0.4, 0.5, 0.55], 1000);
    let cfg = DiagConfig { run, diag: DiagOptions { t_values: Some(t), ..DiagOptions::default() } };
    single_study(
        DiagStudy::Mean,
        cfg,
        out,
        vec!["standardized mean: sqrt(T) (posterior mean - theta0); normality by Lilliefors at 1%".into()],
    )
}

/// The 1-D source `η(z) = θ` under `U[−1, 1]` with observed 0: acceptance rate is exactly `ε`.
pub fn analytic_slope(n: u64, seed: u64) -> Result<SlopeFit> {
    let src = IdentitySource { dim: 1 };
    let obs = SummaryVector::new(vec![0.0], "identity");
    let prior = PriorRegion::unit_box(&[(-1.0, 1.0)]);
    let problem = AbcProblem::new(&obs, &prior, &src, &DistanceSpec::Euclidean);
    let points = acceptance_rates(&problem, &log_grid(0.01, 0.5, 8), n, seed, None)?;
    fit_log_slope(&points, SlopeRegime::Whole)
}

fn slopes(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[1000])[0];
    let n = spec.n.unwrap_or(1_000_000);
    let options = DiagOptions {
        slope: SlopeOptions { n, max_n: SlopeOptions::default().max_n.max(n), ..SlopeOptions::default() },
        ..DiagOptions::default()
    };
    let mut parts = Vec::new();
    let mut stages = Vec::new();
    let mut summary = Table::new(&["model", "regime", "slope", "stderr", "expected", "points"]);
    let models =
        [("ma2", ma2_config(spec, t, &[0.5], 1)), ("gaussian", gaussian_config(spec, t, power_eps(&[0.5]), 100, 1))];
    for (name, mut run) in models {
        run.screen_sigmas = None;
        out.set_prefix(name);
        let cfg = DiagConfig { run, diag: options.clone() };
        let r = run_study(DiagStudy::Slope, &cfg, out)?;
        if let StudyResult::Slope { result } = &r.result {
            for (fit, expected) in [(&result.pair.small, result.k_eta), (&result.pair.large, result.k_theta)] {
                summary.push(vec![
                    name.into(),
                    format!("{:?}", fit.regime).to_lowercase().into(),
                    fit.slope.into(),
                    fit.stderr.into(),
                    expected.into(),
                    fit.n_points.into(),
                ]);
            }
        }
        stages.extend(r.stages.into_iter().map(|mut s| {
            s.stage = format!("{name}/{}", s.stage);
            s
        }));
        parts.push((name.to_string(), r.result));
    }
    out.set_prefix("");
    let analytic = analytic_slope(n, derive_seed(spec.seed, &[7]))?;
    summary.push(vec![
        "identity-1d".into(),
        "whole".into(),
        analytic.slope.into(),
        analytic.stderr.into(),
        1usize.into(),
        analytic.n_points.into(),
    ]);
    out.write_csv("slopes.csv", &summary)?;
    Ok(ExperimentRun {
        result: ExperimentResult::Slopes { parts, analytic },
        stages,
        failures: Vec::new(),
        notes: vec![
            "rates from one proposal stream per model; defensive mixture 0.1 prior + 0.9 N(theta0, (2/v_T)^2 I), weights prior/proposal".into(),
            "grids: eps v_T in [0.05, 0.25] (small) and [4, 12] (large), 6 log-spaced points each".into(),
        ],
        summary: Some(summary),
    })
}

/// `b⁻¹(η)` for `b(θ) = θ + aθ²` on the branch through `θ > −1/(2a)`.
pub fn toy_inverse_binding(eta: f64, curvature: f64) -> f64 {
    if curvature == 0.0 {
        eta
    } else {
        // 2η / (1 + sqrt(1 + 4aη)) avoids cancellation for small a.
        2.0 * eta / (1.0 + (1.0 + 4.0 * curvature * eta).sqrt())
    }
}

/// Posterior-mean bias of the toy model across tolerances.
///
/// Each replication contributes `E_Π[θ] − b⁻¹(η(y))`; subtracting the noiseless inversion of
/// the observed summary removes the `O(v_T⁻¹)` sampling noise of `η(y)` while changing the
/// target by only `O(v_T⁻²)`.
pub fn bias_study(
    curvature: f64,
    theta0: f64,
    prior: (f64, f64),
    t_len: usize,
    eps: &[f64],
    retain_k: usize,
    r: u64,
    seed: u64,
) -> Result<BiasReport> {
    let cfg = RunConfig {
        model: ModelConfig::Toy { curvature },
        theta0: vec![theta0],
        t_len,
        summary: "toy_mean".into(),
        distance: DistanceSpec::Euclidean,
        prior: PriorRegion::unit_box(&[prior]),
        schedules: OneOrMany::Many(eps.iter().map(|&eps| ToleranceSchedule::FixedEps { eps }).collect()),
        n: None,
        retain_k: Some(retain_k),
        max_n: None,
        r,
        seed,
        path: SimulationPath::Sufficient,
        screen_sigmas: None,
        budget_cap: None,
    };
    cfg.check_budget()?;
    let reps = run_replications(&cfg.study()?, r, seed)?;
    let slope_term = 1.0 + 2.0 * curvature * theta0;
    let mut rows = Vec::new();
    for (j, &e) in eps.iter().enumerate() {
        let mut centred = Vec::new();
        let mut raw = Vec::new();
        for rep in &reps {
            if let Some(s) = rep.outcomes[j].sample() {
                let m = s.mean()[0];
                centred.push(m - toy_inverse_binding(rep.observed.values[0], curvature));
                raw.push(m - theta0);
            }
        }
        if centred.len() < 2 {
            return Err(Error::EmptySample { n_proposals: 0, min_distance: f64::NAN });
        }
        let root = (centred.len() as f64).sqrt();
        let (bias, se) = (mean(&centred), std_dev(&centred) / root);
        let predicted = -curvature * e * e / (slope_term * slope_term);
        rows.push(BiasRow {
            curvature,
            eps: e,
            bias,
            se,
            predicted,
            within_3se: (bias - predicted).abs() < 3.0 * se,
            raw_bias: mean(&raw),
            raw_se: std_dev(&raw) / root,
            reps: centred.len(),
        });
    }
    let slopes = if curvature != 0.0 && rows.len() >= 2 && rows.iter().all(|r| r.bias != 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.bias.abs().ln()).collect();
        let (_, b, se) = ols_line(&xs, &ys);
        vec![(curvature, b, se)]
    } else {
        Vec::new()
    };
    Ok(BiasReport { t_len, theta0, retain_k, rows, slopes })
}

fn bias(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let t = spec.t_or(&[1_000_000])[0];
    let k = spec.retain_k.unwrap_or(20_000);
    let r = spec.r.unwrap_or(100);
    let eps = [0.2, 0.3, 0.4];
    let mut report = bias_study(0.5, 1.0, (0.5, 1.5), t, &eps, k, r, spec.seed)?;
    let linear = bias_study(0.0, 1.0, (0.5, 1.5), t, &eps, k, r, derive_seed(spec.seed, &[1]))?;
    report.rows.extend(linear.rows);
    let mut table =
        Table::new(&["curvature", "eps", "bias", "se", "predicted", "within_3se", "raw_bias", "raw_se", "reps"]);
    for row in &report.rows {
        table.push(vec![
            row.curvature.into(),
            row.eps.into(),
            row.bias.into(),
            row.se.into(),
            row.predicted.into(),
            row.within_3se.into(),
            row.raw_bias.into(),
            row.raw_se.into(),
            row.reps.into(),
        ]);
    }
    out.write_csv("bias.csv", &table)?;
    let mut slopes = Table::new(&["curvature", "slope", "stderr"]);
    for (a, b, se) in &report.slopes {
        slopes.push(vec![(*a).into(), (*b).into(), (*se).into()]);
    }
    out.write_csv("bias_slope.csv", &slopes)?;
    let mut summary = Table::new(&["a", "eps", "bias", "se", "predicted", "within_3se"]);
    for row in &report.rows {
        summary.push(vec![
            row.curvature.into(),
            row.eps.into(),
            row.bias.into(),
            row.se.into(),
            row.predicted.into(),
            row.within_3se.into(),
        ]);
    }
    Ok(ExperimentRun {
        result: ExperimentResult::Bias { report },
        stages: Vec::new(),
        failures: Vec::new(),
        notes: vec![
            format!("toy model y_t ~ N(theta + a theta^2, 1), theta0 = 1, prior U[0.5, 1.5], T = {t}"),
            format!("{k} retained draws per tolerance, {r} replications, shared proposal stream per replication"),
        ],
        summary: Some(summary),
    })
}

/// Random full-rank `G₀` (`k_η × k_θ`) and positive definite `V₀`.
pub fn random_gap_instance(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = rng_from_seed(seed);
    let k_theta = rng.random_range(1..=3usize);
    let k_eta = k_theta + rng.random_range(0..=3usize);
    let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = normal(k_eta, k_theta);
    let a = normal(k_eta, k_eta);
    let v = &a * a.transpose() / k_eta as f64 + DMatrix::identity(k_eta, k_eta) * 0.05;
    (g, v)
}

pub fn gap_study(instances: usize, seed: u64) -> Result<GapReport> {
    let mut psd = 0;
    let mut smallest = f64::INFINITY;
    for i in 0..instances {
        let (g, v) = random_gap_instance(derive_seed(seed, &[i as u64]));
        let gap = variance_gap(&g, &v)?;
        psd += usize::from(gap.psd);
        smallest = smallest.min(gap.min_eigenvalue);
    }
    let hand = variance_gap(
        &DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
        &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])),
    )?;
    Ok(GapReport { instances, psd, smallest_eigenvalue: smallest, hand })
}

fn gap(spec: &ExperimentSpec, out: &mut OutputDir) -> Result<ExperimentRun> {
    let instances = spec.r.unwrap_or(1000) as usize;
    let report = gap_study(instances, spec.seed)?;
    let mut table = Table::new(&["instance", "k_eta", "k_theta", "min_eigenvalue", "psd"]);
    for i in 0..instances {
        let (g, v) = random_gap_instance(derive_seed(spec.seed, &[i as u64]));
        let gap = variance_gap(&g, &v)?;
        table.push(vec![i.into(), g.nrows().into(), g.ncols().into(), gap.min_eigenvalue.into(), gap.psd.into()]);
    }
    out.write_csv("gap_instances.csv", &table)?;
    let h = &report.hand;
    let mut hand = Table::new(&["projection_var", "optimal_var", "gap"]);
    hand.push(vec![h.projection_var[(0, 0)].into(), h.optimal_var[(0, 0)].into(), h.gap[(0, 0)].into()]);
    out.write_csv("gap_example.csv", &hand)?;
    let mut summary = Table::new(&["instances", "psd", "smallest_eigenvalue", "example_gap"]);
    summary.push(vec![
        report.instances.into(),
        report.psd.into(),
        report.smallest_eigenvalue.into(),
        Cell::from(h.gap[(0, 0)]),
    ]);
    Ok(ExperimentRun {
        result: ExperimentResult::Gap { report },
        stages: Vec::new(),
        failures: Vec::new(),
        notes: vec![
            "instances: k_theta in 1..3, k_eta in k_theta..k_theta+3, G0 iid N(0,1), V0 = AA'/k_eta + 0.05 I".into()
        ],
        summary: Some(summary),
    })
}
