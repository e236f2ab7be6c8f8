use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abc_core::harness::io::write_atomic;
use abc_core::harness::{
    exact_gaussian_table, execute, rates_oracle, read_series_csv, replay, DiagConfig, DiagStudy, Execution,
    ExperimentSpec, Invocation, RunConfig, RunManifest, DEFAULT_SEED, EXPERIMENTS, MANIFEST_FILE,
};
use abc_core::oracles::{DeviationModel, DEFAULT_JOINT_GRID};
use abc_core::Error;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

/// Approximate Bayesian computation: samplers, reference oracles and experiment recipes.
#[derive(Parser)]
#[command(name = "abc", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one diagnostic study: rmse, coverage, concentration, shape, mean or slope.
    Diag {
        study: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference computations that need no sampling.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run a registered experiment recipe (`abc experiment list` shows them).
    Experiment(ExperimentArgs),
    /// Re-run a manifest and compare every output hash.
    Replay {
        manifest: PathBuf,
        /// Where to write the re-run (default: `replay/` next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact (μ, σ) marginal posteriors of a Gaussian sample under a uniform box prior.
    ExactGaussian {
        /// One value per line; a header line is skipped.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.5, 1.5])]
        mu_range: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.5, 1.5])]
        sigma_range: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_JOINT_GRID)]
        grid: usize,
    },
    /// Posterior concentration rate for a deviation bound.
    Rates {
        /// Polynomial tail exponent.
        #[arg(long, conflicts_with = "tau", required_unless_present = "tau")]
        kappa: Option<f64>,
        /// Exponential tail exponent.
        #[arg(long)]
        tau: Option<f64>,
        /// Prior-mass exponent.
        #[arg(long = "D")]
        d: f64,
        /// Summary rate exponent, v_T = T^h.
        #[arg(long)]
        h: f64,
        /// Sample sizes for the rate grid.
        #[arg(long = "T", value_delimiter = ',', default_values_t = [100.0, 1000.0, 10000.0, 100000.0])]
        t_values: Vec<f64>,
        /// Directory for rates.json and rate_grid.csv; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    name: String,
    /// Sample sizes, comma separated.
    #[arg(long = "T", value_delimiter = ',')]
    t_values: Option<Vec<usize>>,
    #[arg(long = "R")]
    r: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long = "retain-K")]
    retain_k: Option<usize>,
    #[arg(long = "N")]
    n: Option<u64>,
    #[arg(long)]
    budget_cap: Option<u128>,
    /// Output directory (default: `results/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_PARTIAL: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Run { config, out } => {
            let config = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            report_budget(&config)?;
            finish(execute(&Invocation::Run { config }, &out)?, &out)
        }
        Command::Diag { study, config, out } => {
            let study = DiagStudy::parse(&study)?;
            let config = DiagConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            finish(execute(&Invocation::Diag { study, config }, &out)?, &out)
        }
        Command::Experiment(args) => {
            if args.name == "list" {
                for r in EXPERIMENTS {
                    println!("{:<22} {}", r.name, r.description);
                }
                return Ok(ExitCode::SUCCESS);
            }
            let out = args.out.clone().unwrap_or_else(|| Path::new("results").join(&args.name));
            let spec = ExperimentSpec {
                name: args.name,
                t_values: args.t_values,
                r: args.r,
                seed: args.seed,
                retain_k: args.retain_k,
                n: args.n,
                budget_cap: args.budget_cap,
            };
            abc_core::harness::find_recipe(&spec.name)?;
            finish(execute(&Invocation::Experiment { spec }, &out)?, &out)
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::load(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("replay"));
            let report = replay(&m, &out)?;
            for f in &report.files {
                let status = if f.matches() { "ok" } else { "DIFFERS" };
                println!("{status:>8}  {}", f.path.display());
            }
            for p in &report.extra {
                println!("{:>8}  {}", "EXTRA", p.display());
            }
            if report.identical() {
                println!("{} outputs reproduced byte-identically", report.files.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} of {} outputs differ", report.mismatches().len(), report.files.len());
                Ok(ExitCode::from(EXIT_MISMATCH))
            }
        }
        Command::Oracle(OracleCommand::ExactGaussian { data, out, mu_range, sigma_range, grid }) => {
            let y = read_series_csv(&data)?;
            let table = exact_gaussian_table(&y, [(mu_range[0], mu_range[1]), (sigma_range[0], sigma_range[1])], grid)?;
            write_atomic(&out, table.render(',').as_bytes())?;
            println!("wrote {} grid points to {}", table.rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(OracleCommand::Rates { kappa, tau, d, h, t_values, out }) => {
            let model = match (kappa, tau) {
                (Some(k), None) => DeviationModel::polynomial(k, d, h)?,
                (None, Some(t)) => DeviationModel::exponential(t, d, h)?,
                _ => bail!("give exactly one of --kappa and --tau"),
            };
            let (report, grid) = rates_oracle(model, &t_values)?;
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            print!("{}", grid.render_pretty());
            if let Some(dir) = out {
                write_atomic(&dir.join("rates.json"), json.as_bytes())?;
                write_atomic(&dir.join("rate_grid.csv"), grid.render(',').as_bytes())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report_budget(cfg: &RunConfig) -> anyhow::Result<()> {
    let b = cfg.check_budget()?;
    let kind = if b.exact { "exactly" } else { "at most" };
    eprintln!("budget: {kind} {} simulations ({} per replication)", b.total, b.n_per_rep);
    Ok(())
}

fn finish(run: Execution, out: &Path) -> anyhow::Result<ExitCode> {
    if let Some(t) = &run.summary {
        print!("{}", t.render_pretty());
    }
    let m = &run.manifest;
    println!("{} files, manifest {} ({:.1} s)", m.outputs.len(), out.join(MANIFEST_FILE).display(), m.wall_time_secs);
    match m.check() {
        Err(e @ Error::PartialFailure { .. }) => {
            for f in &m.failures {
                eprintln!("warning: {}/{}: {} of {} replications empty", f.stage, f.schedule, f.empty, f.total);
            }
            eprintln!("error: {e}");
            Ok(ExitCode::from(EXIT_PARTIAL))
        }
        Err(e) => Err(e.into()),
        Ok(()) => Ok(ExitCode::SUCCESS),
    }
}
