//! `mnar-fusion` command-line interface.
//!
//! Exit codes: 0 success, 1 data or convergence failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mnar_fusion::simulation::Setting;

use crate::config::RunConfig;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "MNAR_FUSION_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "mnar-fusion", version, about = "Outcome-mean estimation under MNAR missingness with an auxiliary MAR dataset")]
struct Cli {
    /// Worker threads for replicate, bootstrap and oracle batteries.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $MNAR_FUSION_OUT_DIR, else "."].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset from a simulation design, with its truth sidecar.
    Simulate(SimulateArgs),
    /// Estimate the primary-domain outcome mean from a dataset.
    Estimate(EstimateArgs),
    /// Monte Carlo replication of a simulation design.
    Replicate(ReplicateArgs),
    /// Check identification results on random and supplied discrete laws.
    OracleCheck(OracleArgs),
    /// Read an externally formatted CSV through a schema map.
    Ingest(IngestArgs),
    /// Write the bundled synthetic fixtures.
    Fixture(FixtureArgs),
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    /// Design: 1 or 2.
    #[arg(long)]
    pub model: Option<u8>,
    /// T (working models correct) or F.
    #[arg(long)]
    pub setting: Option<Setting>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// File stem for the outputs.
    #[arg(long)]
    pub prefix: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct EstimateArgs {
    /// Pooled dataset CSV (or an external CSV with --schema-map).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// 1, 2, plugin, mar or mcar.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub schema_map: Option<PathBuf>,
    #[arg(long)]
    pub missing_token: Option<String>,
    /// Bootstrap resamples for a percentile interval.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub bootstrap_seed: Option<u64>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    /// Resample the pooled rows instead of within each domain.
    #[arg(long)]
    pub unstratified: bool,
    /// Propensity basis, e.g. "1,x,m".
    #[arg(long)]
    pub propensity_basis: Option<String>,
    #[arg(long)]
    pub h_basis: Option<String>,
    /// Basis for the auxiliary regressions on X.
    #[arg(long)]
    pub aux_basis: Option<String>,
    /// Outcome regression basis of the plug-in estimator.
    #[arg(long)]
    pub outcome_basis: Option<String>,
    /// Baseline propensity basis of the second model.
    #[arg(long)]
    pub baseline_basis: Option<String>,
    /// Let the odds-ratio slope vary linearly in each covariate.
    #[arg(long)]
    pub or_x_interaction: bool,
    #[arg(long)]
    pub fixed_gamma: Option<f64>,
    /// JSON report path [default: <out-dir>/estimate_<estimator>.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ReplicateArgs {
    #[arg(long)]
    pub model: Option<u8>,
    /// Comma-separated settings.
    #[arg(long, value_delimiter = ',')]
    pub setting: Option<Vec<Setting>>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of ipw, plugin, mar, mcar.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
}

#[derive(Args, Debug, Default)]
pub struct OracleArgs {
    /// Random laws per model in the battery (0 skips it).
    #[arg(long)]
    pub laws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Law file(s) in cell-list format to check as well.
    #[arg(long)]
    pub law: Vec<PathBuf>,
    /// Model whose checks apply to the supplied laws: 1 or 2.
    #[arg(long)]
    pub law_model: Option<u8>,
}

#[derive(Args, Debug, Default)]
pub struct IngestArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema_map: Option<PathBuf>,
    /// Pooled CSV output [default: <out-dir>/<data stem>_pooled.csv].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct FixtureArgs {
    #[arg(long)]
    pub n_primary: Option<usize>,
    #[arg(long)]
    pub n_auxiliary: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Error meaning the invocation itself was wrong (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<mnar_fusion::Error>() {
        Some(mnar_fusion::Error::Config(_) | mnar_fusion::Error::InvalidBasis(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) if !path.exists() => return Err(usage(format!("config file {} does not exist", path.display()))),
        Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    let workers = cli.workers.or(cfg.workers);
    if let Some(w) = workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let out_dir = cli
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, &cfg.simulate, &out_dir),
        Command::Estimate(a) => commands::estimate(a, &cfg.estimate, &out_dir),
        Command::Replicate(a) => commands::replicate(a, &cfg.replicate, &out_dir),
        Command::OracleCheck(a) => commands::oracle_check(a, &cfg.oracle_check, &out_dir),
        Command::Ingest(a) => commands::ingest(a, &cfg.ingest, &out_dir),
        Command::Fixture(a) => commands::fixture(a, &cfg.fixture, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(mnar_fusion::Error::Validation(violations)) = err.downcast_ref::<mnar_fusion::Error>() {
                for v in violations {
                    eprintln!("  {v}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
