//! Replication studies driven by a [`DiagConfig`]: the `abc diag` subcommands and the
//! building blocks of the experiment recipes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io::{Cell, OutputDir, PlotData, Table};
use crate::diagnostics::{
    acceptance_slope, concentration_curve, coverage_from_replications, gaussian_rmse_study, kde, log_grid,
    posterior_mean_from_replications, shape_report, Bandwidth, ConcentrationPoint, CoverageReport, MeanCell,
    RmseReport, ShapeContext, ShapeRegime, SlopePair, FAILURE_FLAG_FRACTION, MIN_KDE_DRAWS,
};
use crate::engine::{
    observed_seed, proposal_seed, run_replications, AbcProblem, ImportanceProposal, ModelSpec, PosteriorSample,
    Replication, SummarySource,
};
use crate::error::{Error, Result};
use crate::models::{GaussianParams, Ma2Params};
use crate::oracles::LimitShapeSpec;
use crate::stats::{linspace, mean, median};
use crate::summaries::{binding_gaussian, binding_ma2, binding_toy, BindingValue, SummaryMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagStudy {
    Rmse,
    Coverage,
    Concentration,
    Shape,
    Mean,
    Slope,
}

impl DiagStudy {
    pub const ALL: [DiagStudy; 6] = [
        DiagStudy::Rmse,
        DiagStudy::Coverage,
        DiagStudy::Concentration,
        DiagStudy::Shape,
        DiagStudy::Mean,
        DiagStudy::Slope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagStudy::Rmse => "rmse",
            DiagStudy::Coverage => "coverage",
            DiagStudy::Concentration => "concentration",
            DiagStudy::Shape => "shape",
            DiagStudy::Mean => "mean",
            DiagStudy::Slope => "slope",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        DiagStudy::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let names: Vec<_> = DiagStudy::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown study `{name}`; expected one of {}", names.join(", ")))
        })
    }
}

/// Acceptance-rate grid, in units of `1/v_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeOptions {
    pub small: [f64; 2],
    pub large: [f64; 2],
    pub points: usize,
    /// Proposals per grid point (one stream serves every point).
    pub n: u64,
    /// Grow `n` until every grid point has this many hits...
    pub min_hits: u64,
    /// ...or `n` reaches this.
    pub max_n: u64,
    /// Sample from a defensive normal mixture around `theta0` instead of the prior.
    pub importance: bool,
    /// Normal component SD, in units of `1/v_T`.
    pub is_scale: f64,
    pub prior_weight: f64,
}

impl Default for SlopeOptions {
    fn default() -> Self {
        SlopeOptions {
            small: [0.05, 0.25],
            large: [4.0, 12.0],
            points: 6,
            n: 1_000_000,
            min_hits: 50,
            max_n: 100_000_000,
            importance: true,
            is_scale: 2.0,
            prior_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagOptions {
    /// Credible level for coverage.
    pub level: f64,
    /// Ball radius for concentration.
    pub delta: f64,
    /// Sample sizes to run; defaults to the configuration's own `T`.
    pub t_values: Option<Vec<usize>>,
    /// Integration grid of the exact posterior (marginals have twice as many points).
    pub grid_size: usize,
    /// Schedule index the RMSE ratios divide by; defaults to the smallest quantile.
    pub reference: Option<usize>,
    pub slope: SlopeOptions,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            level: 0.95,
            delta: 0.15,
            t_values: None,
            grid_size: crate::oracles::DEFAULT_JOINT_GRID,
            reference: None,
            slope: SlopeOptions::default(),
        }
    }
}

/// A run configuration plus study options under a `diag` key, read from one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub diag: DiagOptions,
}

impl<'de> Deserialize<'de> for DiagConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        // Split off `diag` so the run configuration keeps rejecting unknown keys.
        let mut value = serde_json::Value::deserialize(d)?;
        let diag = match value.as_object_mut() {
            Some(map) => map.remove("diag"),
            None => return Err(D::Error::custom("a diagnostics configuration must be a JSON object")),
        };
        let run = RunConfig::deserialize(value).map_err(D::Error::custom)?;
        let diag = match diag {
            Some(v) => DiagOptions::deserialize(v).map_err(D::Error::custom)?,
            None => DiagOptions::default(),
        };
        Ok(DiagConfig { run, diag })
    }
}

impl DiagConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: DiagConfig = serde_json::from_str(text)?;
        cfg.run.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        DiagConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn t_values(&self) -> Vec<usize> {
        self.diag.t_values.clone().unwrap_or_else(|| vec![self.run.t_len])
    }
}

/// Acceptance statistics of one schedule at one stage of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub schedule: String,
    pub reps: usize,
    pub empty: usize,
    pub mean_acceptance_rate: f64,
    pub mean_realized_eps: f64,
    pub mean_proposals: f64,
    /// Simulations summed over replications (a shared stream is counted once per replication).
    pub total_simulated: u128,
}

pub fn stage_stats(stage: &str, reps: &[Replication], labels: &[String]) -> Vec<StageStats> {
    let simulated: u128 = reps
        .iter()
        .map(|r| r.outcomes.iter().filter_map(|o| o.sample()).map(|s| s.n_simulated).max().unwrap_or(0) as u128)
        .sum();
    labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let samples: Vec<&PosteriorSample> = reps.iter().filter_map(|r| r.outcomes[j].sample()).collect();
            let avg = |f: &dyn Fn(&PosteriorSample) -> f64| {
                if samples.is_empty() {
                    f64::NAN
                } else {
                    samples.iter().map(|s| f(s)).sum::<f64>() / samples.len() as f64
                }
            };
            StageStats {
                stage: stage.to_string(),
                schedule: label.clone(),
                reps: reps.len(),
                empty: reps.len() - samples.len(),
                mean_acceptance_rate: avg(&|s| s.acceptance_rate),
                mean_realized_eps: avg(&|s| s.realized_epsilon),
                mean_proposals: avg(&|s| s.n_proposals as f64),
                total_simulated: simulated,
            }
        })
        .collect()
}

/// A schedule whose share of empty replications exceeds the tolerated fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub stage: String,
    pub schedule: String,
    pub empty: usize,
    pub total: usize,
}

fn failures(stages: &[StageStats]) -> Vec<FailureNote> {
    stages
        .iter()
        .filter(|s| s.empty as f64 > FAILURE_FLAG_FRACTION * s.reps as f64)
        .map(|s| FailureNote { stage: s.stage.clone(), schedule: s.schedule.clone(), empty: s.empty, total: s.reps })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSummaryRow {
    pub schedule: String,
    pub regime: ShapeRegime,
    /// Replications with enough draws to test.
    pub reps: usize,
    pub passes_1pct: usize,
    pub pass_rate: f64,
    /// Per parameter, the median over replications of the variance ratio.
    pub median_variance_ratio: Vec<f64>,
    /// Median of `v_T ε` across replications.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub t_len: usize,
    pub v_t: f64,
    pub k_theta: usize,
    pub k_eta: usize,
    pub pair: SlopePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case")]
pub enum StudyResult {
    Rmse { report: RmseReport },
    Coverage { reports: Vec<(usize, CoverageReport)> },
    Concentration { delta: f64, points: Vec<ConcentrationPoint> },
    Shape { t_len: usize, rows: Vec<ShapeSummaryRow> },
    Mean { cells: Vec<(usize, MeanCell)> },
    Slope { result: SlopeResult },
}

/// What a study produced, plus the bookkeeping the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub result: StudyResult,
    pub stages: Vec<StageStats>,
    pub failures: Vec<FailureNote>,
    #[serde(skip)]
    pub summary: Option<Table>,
}

impl StudyRun {
    fn new(result: StudyResult, stages: Vec<StageStats>, summary: Table) -> Self {
        let failures = failures(&stages);
        StudyRun { result, stages, failures, summary: Some(summary) }
    }

    /// `PartialFailure` when some schedule lost more than 5% of its replications.
    pub fn check(&self) -> Result<()> {
        match self.failures.iter().max_by_key(|f| f.empty) {
            Some(f) => Err(Error::PartialFailure { failed: f.empty, total: f.total }),
            None => Ok(()),
        }
    }
}

pub fn run_study(study: DiagStudy, cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    match study {
        DiagStudy::Rmse => rmse(cfg, out),
        DiagStudy::Coverage => coverage(cfg, out),
        DiagStudy::Concentration => concentration(cfg, out),
        DiagStudy::Shape => shape(cfg, out),
        DiagStudy::Mean => mean_study(cfg, out),
        DiagStudy::Slope => slope(cfg, out),
    }
}

/// Runs the configured replications at sample size `t_len` after the budget check.
pub fn replicate_at(cfg: &RunConfig, t_len: usize) -> Result<Vec<Replication>> {
    let cfg = cfg.with_t(t_len);
    cfg.check_budget()?;
    run_replications(&cfg.study()?, cfg.r, cfg.seed)
}

fn stage_name(t_len: usize) -> String {
    format!("T={t_len}")
}

/// Gaussian KDE of `xs` on 200 points spanning the draws plus three bandwidths.
pub fn kde_curve(xs: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    if xs.len() < MIN_KDE_DRAWS {
        return None;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let probe = kde(xs, &[lo], Bandwidth::Silverman).ok()?;
    let pad = 3.0 * probe.bandwidth;
    let grid = linspace(lo - pad, hi + pad, 200);
    let est = kde(xs, &grid, Bandwidth::Silverman).ok()?;
    Some((est.grid, est.ordinates))
}

fn rmse(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    if !run.is_quantile() {
        return Err(Error::Config("the RMSE study compares quantile schedules".into()));
    }
    run.check_budget()?;
    let schedules = run.schedules();
    let labels = run.labels();
    let reference = match cfg.diag.reference {
        Some(i) => i,
        None => {
            let alphas: Vec<f64> =
                schedules.iter().map(|s| crate::engine::alpha_from_schedule(s, run.t_len)).collect::<Result<_>>()?;
            (0..alphas.len()).min_by(|&a, &b| alphas[a].total_cmp(&alphas[b])).expect("nonempty")
        }
    };
    let study = run.study()?;
    let (reps, report) = gaussian_rmse_study(&study, &labels, reference, run.r, run.seed, cfg.diag.grid_size)?;

    let mut cells = Table::new(&["schedule", "param", "avg_rmse", "ratio_to_reference", "r", "failed", "flagged"]);
    for c in &report.cells {
        cells.push(vec![
            (&c.schedule).into(),
            (&c.param).into(),
            c.avg_rmse.into(),
            c.ratio_to_reference.into(),
            c.r.into(),
            c.failed.into(),
            c.flagged.into(),
        ]);
    }
    out.write_csv("rmse_cells.csv", &cells)?;

    // Ratio table: one row per parameter, one column per non-reference schedule.
    let others: Vec<usize> = (0..labels.len()).filter(|&j| j != reference).collect();
    let mut header = vec!["param".to_string()];
    header.extend(others.iter().map(|&j| labels[j].clone()));
    let mut ratios = Table::new(&header);
    for name in ["mu", "sigma"] {
        let mut row: Vec<Cell> = vec![name.into()];
        for &j in &others {
            row.push(report.cell(&labels[j], name).map_or(f64::NAN, |c| c.ratio_to_reference).into());
        }
        ratios.push(row);
    }
    out.write_csv("table1.csv", &ratios)?;

    // Densities of the first replication against the exact marginals.
    let mut plot = PlotData::default();
    if let Some(rep) = reps.first() {
        let exact = crate::diagnostics::gaussian_exact_marginals(rep, &run.prior, run.t_len, cfg.diag.grid_size)?;
        for (p, ex) in exact.iter().enumerate() {
            plot.extend_series(&ex.grid, &ex.density, &format!("exact/{}", ex.param_name));
            for (j, label) in labels.iter().enumerate() {
                if let Some(s) = rep.outcomes[j].sample().filter(|s| s.len() >= MIN_KDE_DRAWS) {
                    if let Ok(est) = kde(&s.column(p), &ex.grid, Bandwidth::Silverman) {
                        plot.extend_series(&est.grid, &est.ordinates, &format!("{label}/{}", ex.param_name));
                    }
                }
            }
        }
    }
    out.write_plot("fig1_densities.tsv", &plot)?;

    let stages = stage_stats(&stage_name(run.t_len), &reps, &labels);
    let mut summary = Table::new(&["param", "schedule", "avg_rmse", "ratio"]);
    for c in &report.cells {
        summary.push(vec![(&c.param).into(), (&c.schedule).into(), c.avg_rmse.into(), c.ratio_to_reference.into()]);
    }
    Ok(StudyRun::new(StudyResult::Rmse { report }, stages, summary))
}

fn coverage(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    let labels = run.labels();
    let names = run.param_names();
    let mut reports = Vec::new();
    let mut stages = Vec::new();
    for t in cfg.t_values() {
        let reps = replicate_at(run, t)?;
        stages.extend(stage_stats(&stage_name(t), &reps, &labels));
        reports.push((t, coverage_from_replications(&reps, &labels, names, &run.theta0, cfg.diag.level)?));
    }
    let mut table = Table::new(&["T", "schedule", "param", "avg_width", "coverage_pct", "r", "failed", "flagged"]);
    let mut summary = Table::new(&["T", "schedule", "param", "width", "coverage%"]);
    for (t, rep) in &reports {
        for c in &rep.cells {
            table.push(vec![
                (*t).into(),
                (&c.schedule).into(),
                (&c.param).into(),
                c.avg_width.into(),
                c.coverage_pct.into(),
                c.r.into(),
                c.failed.into(),
                c.flagged.into(),
            ]);
            summary.push(vec![
                (*t).into(),
                (&c.schedule).into(),
                (&c.param).into(),
                c.avg_width.into(),
                c.coverage_pct.into(),
            ]);
        }
    }
    out.write_csv("coverage.csv", &table)?;
    Ok(StudyRun::new(StudyResult::Coverage { reports }, stages, summary))
}

fn concentration(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    let labels = run.labels();
    if labels.len() != 1 {
        return Err(Error::Config("the concentration study takes a single schedule".into()));
    }
    let t_values = cfg.diag.t_values.clone().unwrap_or_else(|| vec![500, 1000, 5000]);
    let mut samples = Vec::new();
    let mut stages = Vec::new();
    let mut plot = PlotData::default();
    for &t in &t_values {
        let reps = replicate_at(run, t)?;
        stages.extend(stage_stats(&stage_name(t), &reps, &labels));
        if let Some(s) = reps.first().and_then(|r| r.outcomes[0].sample()) {
            for (p, name) in run.param_names().iter().enumerate() {
                if let Some((x, y)) = kde_curve(&s.column(p)) {
                    plot.extend_series(&x, &y, &format!("T={t}/{name}"));
                }
            }
        }
        samples.push((t, reps.iter().filter_map(|r| r.outcomes[0].sample().cloned()).collect()));
    }
    let points = concentration_curve(&samples, &run.theta0, cfg.diag.delta)?;
    let mut table = Table::new(&["T", "outside_mass", "se", "r"]);
    let mut curve = PlotData::default();
    for p in &points {
        table.push(vec![p.t_len.into(), p.outside_mass.into(), p.se.into(), p.per_rep.len().into()]);
        curve.push(p.t_len as f64, p.outside_mass, "outside_mass");
    }
    out.write_csv("concentration.csv", &table)?;
    out.write_plot("concentration_curve.tsv", &curve)?;
    out.write_plot("posterior_densities.tsv", &plot)?;
    let summary = table.clone();
    Ok(StudyRun::new(StudyResult::Concentration { delta: cfg.diag.delta, points }, stages, summary))
}

/// Binding function at `theta` for the configured model and summary.
pub fn binding_at(run: &RunConfig, theta: &[f64]) -> Result<BindingValue> {
    match (run.model.spec(), run.summary_map()?) {
        (ModelSpec::Ma2(_), SummaryMap::AutoCov { max_lag: 2 }) => binding_ma2(Ma2Params::from(theta)),
        (ModelSpec::Gaussian(_), SummaryMap::MeanVar) => binding_gaussian(GaussianParams::new(theta[0], theta[1])),
        (ModelSpec::Toy(toy), SummaryMap::ToyMean) => Ok(binding_toy(theta[0], toy.curvature)),
        (_, s) => Err(Error::Config(format!("no closed-form binding function for summary {}", s.id()))),
    }
}

/// Local limit geometry at `theta0` with `lim v_T ε_T = c`.
pub fn limit_spec(run: &RunConfig, c: f64) -> Result<LimitShapeSpec> {
    let theta0 = &run.theta0;
    match (run.model.spec(), run.summary_map()?) {
        (ModelSpec::Gaussian(_), SummaryMap::MeanVar) => LimitShapeSpec::gaussian_model(theta0[0], theta0[1], c),
        (ModelSpec::Ma2(m), SummaryMap::AutoCov { max_lag: 2 }) => {
            LimitShapeSpec::ma2_model(Ma2Params::from(&theta0[..]), m.innovation.excess_kurtosis(), c)
        }
        (ModelSpec::Toy(_), SummaryMap::ToyMean) => {
            let g = binding_at(run, theta0)?.jacobian.expect("closed form");
            LimitShapeSpec::with_standardizing_scale(g, DMatrix::identity(1, 1), c)
        }
        (_, s) => Err(Error::Config(format!("no limit geometry for summary {}", s.id()))),
    }
}

fn shape(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    let labels = run.labels();
    let t = run.t_len;
    let v_t = (t as f64).sqrt();
    let reps = replicate_at(run, t)?;
    let b0 = binding_at(run, &run.theta0)?.values;
    let schedule_eps: Vec<Option<f64>> = run
        .schedules()
        .iter()
        .map(|s| if s.is_quantile() { None } else { crate::engine::epsilon_from_schedule(s, t).ok() })
        .collect();
    let k_theta = run.theta0.len();

    let mut detail =
        vec!["rep".to_string(), "schedule".into(), "regime".into(), "max_stat_over_crit".into(), "passes_1pct".into()];
    detail.extend(run.param_names().iter().map(|p| format!("variance_ratio_{p}")));
    let mut detail_table = Table::new(&detail);
    let mut rows = Vec::new();
    let mut plot = PlotData::default();
    for (j, label) in labels.iter().enumerate() {
        let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); k_theta];
        let mut cs = Vec::new();
        let mut tallies = [(0usize, 0usize); 3];
        for rep in &reps {
            let Some(sample) = rep.outcomes[j].sample().filter(|s| s.len() >= crate::diagnostics::MIN_SHAPE_DRAWS)
            else {
                continue;
            };
            let eps = schedule_eps[j].unwrap_or(sample.realized_epsilon);
            let c = v_t * eps;
            cs.push(c);
            let spec = limit_spec(run, c)?;
            let ctx = ShapeContext { theta0: &run.theta0, b0: &b0, observed: &rep.observed.values, eps, v_t };
            for (ri, regime) in ShapeRegime::ALL.iter().enumerate() {
                let report = shape_report(sample, &spec, *regime, &ctx)?;
                tallies[ri].0 += 1;
                tallies[ri].1 += usize::from(report.test.passes_1pct);
                if ri == 0 {
                    for (p, r) in report.variance_ratio.iter().enumerate() {
                        ratios[p].push(*r);
                    }
                }
                let worst = report
                    .test
                    .statistics
                    .iter()
                    .zip(&report.test.critical_1pct)
                    .map(|(s, c)| s / c)
                    .fold(0.0, f64::max);
                let mut row: Vec<Cell> = vec![
                    rep.rep.into(),
                    label.into(),
                    regime.name().into(),
                    worst.into(),
                    report.test.passes_1pct.into(),
                ];
                row.extend(report.variance_ratio.iter().map(|&r| Cell::from(r)));
                detail_table.push(row);
            }
            if rep.rep == 0 {
                for (p, name) in run.param_names().iter().enumerate() {
                    if let Some((x, y)) = kde_curve(&sample.column(p)) {
                        plot.extend_series(&x, &y, &format!("{label}/{name}"));
                    }
                }
            }
        }
        let medians: Vec<f64> = ratios.iter().map(|r| if r.is_empty() { f64::NAN } else { median(r) }).collect();
        let c = if cs.is_empty() { f64::NAN } else { median(&cs) };
        for (ri, regime) in ShapeRegime::ALL.iter().enumerate() {
            let (n, pass) = tallies[ri];
            rows.push(ShapeSummaryRow {
                schedule: label.clone(),
                regime: *regime,
                reps: n,
                passes_1pct: pass,
                pass_rate: if n > 0 { pass as f64 / n as f64 } else { f64::NAN },
                median_variance_ratio: medians.clone(),
                c,
            });
        }
    }
    out.write_csv("shape_reps.csv", &detail_table)?;
    let mut header = vec!["schedule".to_string(), "c".into(), "regime".into(), "reps".into(), "pass_rate_1pct".into()];
    header.extend(run.param_names().iter().map(|p| format!("median_variance_ratio_{p}")));
    let mut table = Table::new(&header);
    for r in &rows {
        let mut row: Vec<Cell> =
            vec![(&r.schedule).into(), r.c.into(), r.regime.name().into(), r.reps.into(), r.pass_rate.into()];
        row.extend(r.median_variance_ratio.iter().map(|&v| Cell::from(v)));
        table.push(row);
    }
    out.write_csv("shape_summary.csv", &table)?;
    out.write_plot("posterior_densities.tsv", &plot)?;
    let stages = stage_stats(&stage_name(t), &reps, &labels);
    Ok(StudyRun::new(StudyResult::Shape { t_len: t, rows }, stages, table))
}

fn mean_study(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    let labels = run.labels();
    let names = run.param_names();
    let mut cells = Vec::new();
    let mut stages = Vec::new();
    for t in cfg.t_values() {
        let reps = replicate_at(run, t)?;
        stages.extend(stage_stats(&stage_name(t), &reps, &labels));
        for c in posterior_mean_from_replications(&reps, &labels, names, &run.theta0, t)? {
            cells.push((t, c));
        }
    }
    let mut table = Table::new(&[
        "T",
        "schedule",
        "param",
        "bias",
        "bias_se",
        "ks_stat",
        "ks_critical_1pct",
        "normal_at_1pct",
        "unbiased_3se",
        "r",
    ]);
    let mut plot = PlotData::default();
    for (t, c) in &cells {
        table.push(vec![
            (*t).into(),
            (&c.schedule).into(),
            (&c.param).into(),
            c.bias.into(),
            c.bias_se.into(),
            c.ks_stat.into(),
            c.ks_critical_1pct.into(),
            c.normal_at_1pct.into(),
            c.unbiased_at(3.0).into(),
            c.r.into(),
        ]);
        if let Some((x, y)) = kde_curve(&c.standardized) {
            plot.extend_series(&x, &y, &format!("T={t}/{}/{}", c.schedule, c.param));
        }
    }
    out.write_csv("posterior_mean.csv", &table)?;
    out.write_plot("standardized_mean_densities.tsv", &plot)?;
    let mut summary = Table::new(&["T", "schedule", "param", "bias", "se", "ks", "crit", "normal"]);
    for (t, c) in &cells {
        summary.push(vec![
            (*t).into(),
            (&c.schedule).into(),
            (&c.param).into(),
            c.bias.into(),
            c.bias_se.into(),
            c.ks_stat.into(),
            c.ks_critical_1pct.into(),
            c.normal_at_1pct.into(),
        ]);
    }
    Ok(StudyRun::new(StudyResult::Mean { cells }, stages, summary))
}

fn slope(cfg: &DiagConfig, out: &mut OutputDir) -> Result<StudyRun> {
    let run = &cfg.run;
    let o = &cfg.diag.slope;
    let t = run.t_len;
    let v_t = (t as f64).sqrt();
    let sim = run.simulator()?;
    let observed = sim.observe(&run.theta0, observed_seed(run.seed, 0))?;
    let problem = AbcProblem::new(&observed, &run.prior, &sim, &run.distance);
    let k = run.theta0.len();
    let proposal = if o.importance {
        let s = o.is_scale / v_t;
        Some(ImportanceProposal::new(&run.theta0, DMatrix::identity(k, k) * (s * s), o.prior_weight)?)
    } else {
        None
    };
    let small = log_grid(o.small[0] / v_t, o.small[1] / v_t, o.points);
    let large = log_grid(o.large[0] / v_t, o.large[1] / v_t, o.points);
    if o.max_n < o.n {
        return Err(Error::Config(format!("slope max_n = {} is below n = {}", o.max_n, o.n)));
    }
    let budget = (o.max_n as u128) * 2 * o.points as u128;
    if budget > run.cap() {
        return Err(Error::BudgetExceeded { requested: budget, cap: run.cap() });
    }
    let seed = proposal_seed(run.seed, 0);
    let mut n = o.n;
    let mut simulated = 0u128;
    let pair = loop {
        let pair = acceptance_slope(&problem, &small, &large, v_t, n, seed, proposal.as_ref())?;
        simulated += n as u128;
        let fewest = pair.points.iter().map(|p| p.hits).min().unwrap_or(0);
        if fewest >= o.min_hits || n >= o.max_n {
            break pair;
        }
        // Aim 20% past the target.
        let scale = 1.2 * o.min_hits as f64 / fewest.max(1) as f64;
        n = ((n as f64 * scale).ceil() as u64).clamp(n + 1, o.max_n);
    };
    let result = SlopeResult { t_len: t, v_t, k_theta: k, k_eta: sim.summary_dim(), pair };

    let mut rates = Table::new(&["eps", "eps_vT", "rate", "se", "hits", "n"]);
    let mut plot = PlotData::default();
    for p in &result.pair.points {
        rates.push(vec![p.eps.into(), (p.eps * v_t).into(), p.rate.into(), p.se.into(), p.hits.into(), p.n.into()]);
        let series = if p.eps * v_t < 1.0 { "small-eps" } else { "large-eps" };
        plot.push(p.eps.ln(), p.rate.ln(), series);
    }
    out.write_csv("acceptance_rates.csv", &rates)?;
    out.write_plot("log_rates.tsv", &plot)?;
    let mut table = Table::new(&["regime", "slope", "stderr", "expected", "eps_lo", "eps_hi", "points", "dropped"]);
    for (fit, expected) in [(&result.pair.small, result.k_eta), (&result.pair.large, result.k_theta)] {
        table.push(vec![
            format!("{:?}", fit.regime).to_lowercase().into(),
            fit.slope.into(),
            fit.stderr.into(),
            expected.into(),
            fit.eps_range.0.into(),
            fit.eps_range.1.into(),
            fit.n_points.into(),
            fit.dropped.len().into(),
        ]);
    }
    out.write_csv("slopes.csv", &table)?;
    let stages = vec![StageStats {
        stage: stage_name(t),
        schedule: "rate-grid".into(),
        reps: 1,
        empty: result.pair.points.iter().filter(|p| p.hits == 0).count(),
        mean_acceptance_rate: mean(&result.pair.points.iter().map(|p| p.rate).collect::<Vec<_>>()),
        mean_realized_eps: f64::NAN,
        mean_proposals: n as f64,
        total_simulated: simulated,
    }];
    let mut sr = StudyRun::new(StudyResult::Slope { result }, stages, table);
    // Zero-hit grid points are reported in the fit, not as failed replications.
    sr.failures.clear();
    Ok(sr)
}
