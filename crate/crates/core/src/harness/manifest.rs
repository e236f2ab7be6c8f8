//! Run manifests: what was invoked, what it wrote, and how to reproduce it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::experiments::{run_experiment, ExperimentSpec};
use super::io::{sha256_file, write_atomic, OutputDir, Table};
use super::studies::{replicate_at, run_study, stage_stats, DiagConfig, DiagStudy, FailureNote, StageStats};
use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::oracles::{concentration_rate, exact_gaussian_posterior, DeviationModel, RateReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CODE_VERSION: &str = concat!("abc-core ", env!("CARGO_PKG_VERSION"));

/// A complete description of a command, enough to re-run it without the original files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    Run { config: RunConfig },
    Diag { study: DiagStudy, config: DiagConfig },
    Experiment { spec: ExperimentSpec },
}

impl Invocation {
    pub fn seed(&self) -> u64 {
        match self {
            Invocation::Run { config } => config.seed,
            Invocation::Diag { config, .. } => config.run.seed,
            Invocation::Experiment { spec } => spec.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub invocation: Invocation,
    pub seed: u64,
    pub code_version: String,
    pub wall_time_secs: f64,
    pub stages: Vec<StageStats>,
    pub failures: Vec<FailureNote>,
    pub outputs: Vec<OutputRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// `PartialFailure` if any stage lost more than the tolerated share of replications.
    pub fn check(&self) -> Result<()> {
        match self.failures.iter().max_by_key(|f| f.empty) {
            Some(f) => Err(Error::PartialFailure { failed: f.empty, total: f.total }),
            None => Ok(()),
        }
    }
}

/// What `execute` returns: the manifest written to disk and a terminal summary.
#[derive(Debug, Clone)]
pub struct Execution {
    pub manifest: RunManifest,
    pub summary: Option<Table>,
}

struct Produced {
    stages: Vec<StageStats>,
    failures: Vec<FailureNote>,
    notes: Vec<String>,
    summary: Option<Table>,
}

/// Runs `inv` into `out_dir`; `manifest.json` is written last, after every output is hashed.
pub fn execute(inv: &Invocation, out_dir: &Path) -> Result<Execution> {
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir)?;
    let produced = match inv {
        Invocation::Run { config } => run_command(config, &mut out)?,
        Invocation::Diag { study, config } => {
            let r = run_study(*study, config, &mut out)?;
            Produced { stages: r.stages, failures: r.failures, notes: Vec::new(), summary: r.summary }
        }
        Invocation::Experiment { spec } => {
            let r = run_experiment(spec, &mut out)?;
            Produced { stages: r.stages, failures: r.failures, notes: r.notes, summary: r.summary }
        }
    };
    let outputs = out
        .written()
        .iter()
        .map(|rel| {
            let p = out.root().join(rel);
            Ok(OutputRecord { path: rel.clone(), sha256: sha256_file(&p)?, bytes: fs::metadata(&p)?.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        invocation: inv.clone(),
        seed: inv.seed(),
        code_version: CODE_VERSION.to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        stages: produced.stages,
        failures: produced.failures,
        outputs,
        notes: produced.notes,
    };
    write_atomic(&out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(Execution { manifest, summary: produced.summary })
}

/// `abc run`: one CSV of retained draws per replication plus a per-schedule summary.
fn run_command(cfg: &RunConfig, out: &mut OutputDir) -> Result<Produced> {
    let reps = replicate_at(cfg, cfg.t_len)?;
    let labels = cfg.labels();
    let names = cfg.param_names();
    let mut header = vec!["rep", "schedule", "draw_index"];
    header.extend(names);
    header.push("distance");
    for rep in &reps {
        let mut table = Table::new(&header);
        for (label, outcome) in labels.iter().zip(&rep.outcomes) {
            let Some(s) = outcome.sample() else { continue };
            for p in &s.particles {
                let mut row = vec![rep.rep.into(), label.into(), p.index.into()];
                row.extend(p.theta.iter().map(|&x| x.into()));
                row.push(p.dist.into());
                table.push(row);
            }
        }
        out.write_csv(&format!("reps/rep_{:06}.csv", rep.rep), &table)?;
    }
    let mut summary = Table::new(&[
        "rep",
        "schedule",
        "status",
        "retained",
        "realized_eps",
        "acceptance_rate",
        "n_proposals",
        "n_simulated",
    ]);
    for rep in &reps {
        for (label, outcome) in labels.iter().zip(&rep.outcomes) {
            let row = match outcome.sample() {
                Some(s) => vec![
                    rep.rep.into(),
                    label.into(),
                    "accepted".into(),
                    s.len().into(),
                    s.realized_epsilon.into(),
                    s.acceptance_rate.into(),
                    s.n_proposals.into(),
                    s.n_simulated.into(),
                ],
                None => {
                    let crate::engine::AbcOutcome::Empty { n_proposals, n_simulated, min_distance, .. } = outcome
                    else {
                        unreachable!()
                    };
                    vec![
                        rep.rep.into(),
                        label.into(),
                        "empty".into(),
                        0usize.into(),
                        (*min_distance).into(),
                        0.0.into(),
                        (*n_proposals).into(),
                        (*n_simulated).into(),
                    ]
                }
            };
            summary.push(row);
        }
    }
    out.write_csv("summary.csv", &summary)?;
    let stages = stage_stats("run", &reps, &labels);
    let mut short = Table::new(&["schedule", "reps", "empty", "acceptance_rate", "realized_eps", "proposals"]);
    for s in &stages {
        short.push(vec![
            s.schedule.clone().into(),
            s.reps.into(),
            s.empty.into(),
            s.mean_acceptance_rate.into(),
            s.mean_realized_eps.into(),
            s.mean_proposals.into(),
        ]);
    }
    let failures = stages
        .iter()
        .filter(|s| s.empty as f64 > crate::diagnostics::FAILURE_FLAG_FRACTION * s.reps as f64)
        .map(|s| FailureNote { stage: s.stage.clone(), schedule: s.schedule.clone(), empty: s.empty, total: s.reps })
        .collect();
    Ok(Produced { stages, failures, notes: Vec::new(), summary: Some(short) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileCheck {
    pub path: PathBuf,
    pub expected: String,
    pub actual: Option<String>,
}

impl FileCheck {
    pub fn matches(&self) -> bool {
        self.actual.as_deref() == Some(self.expected.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub files: Vec<FileCheck>,
    /// Files the replay wrote that the original manifest does not list.
    pub extra: Vec<PathBuf>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.extra.is_empty() && self.files.iter().all(FileCheck::matches)
    }

    pub fn mismatches(&self) -> Vec<&FileCheck> {
        self.files.iter().filter(|f| !f.matches()).collect()
    }
}

/// Re-runs the manifest's invocation into `out_dir` and compares every output hash.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<ReplayReport> {
    let again = execute(&manifest.invocation, out_dir)?.manifest;
    let files = manifest
        .outputs
        .iter()
        .map(|o| FileCheck {
            path: o.path.clone(),
            expected: o.sha256.clone(),
            actual: again.outputs.iter().find(|a| a.path == o.path).map(|a| a.sha256.clone()),
        })
        .collect();
    let extra = again
        .outputs
        .iter()
        .filter(|a| !manifest.outputs.iter().any(|o| o.path == a.path))
        .map(|a| a.path.clone())
        .collect();
    Ok(ReplayReport { files, extra })
}

/// Reads one numeric column: the first field of each line, skipping a non-numeric header.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split([',', '\t']).next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Config(format!("{}:{}: `{field}` is not a number", path.display(), i + 1))),
        }
    }
    Ok(TimeSeries::new(values, 0))
}

/// Exact `(μ, σ)` marginals of a Gaussian sample as a long table `(param, x, density)`.
pub fn exact_gaussian_table(y: &TimeSeries, prior_box: [(f64, f64); 2], grid_size: usize) -> Result<Table> {
    let (mu, sigma) = exact_gaussian_posterior(y, prior_box, grid_size)?;
    let mut t = Table::new(&["param", "x", "density"]);
    for g in [&mu, &sigma] {
        for (x, d) in g.grid.iter().zip(&g.density) {
            t.push(vec![g.param_name.clone().into(), (*x).into(), (*d).into()]);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesOracle {
    pub model: DeviationModel,
    pub rate: RateReport,
}

/// Rate report plus its values on a grid of `T`.
pub fn rates_oracle(model: DeviationModel, t_values: &[f64]) -> Result<(RatesOracle, Table)> {
    let rate = concentration_rate(&model)?;
    let mut t = Table::new(&["T", "v_T", "lambda_T", "epsilon_T"]);
    for &n in t_values {
        let v = model.v_t(n);
        t.push(vec![n.into(), v.into(), rate.lambda_at(v).into(), rate.epsilon_at(v).into()]);
    }
    Ok((RatesOracle { model, rate }, t))
}
