//! Command-line surface for `leocov`: reads an experiment config, runs one
//! of the analyses and writes a CSV with a provenance header.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration or usage
//! error, 3 validation failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod output;

use config::{ExperimentConfig, KappaChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "LEOCOV_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::config(message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    /// Library errors: numerical breakdowns get their own code, anything
    /// else is a bad parameter.
    pub fn from_lib(context: &str, e: leocov::Error) -> Self {
        Self {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG },
            message: format!("{context}: {e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "leocov", version, about = "Coverage and spectral efficiency of clustered LEO downlinks")]
pub struct Cli {
    /// Worker threads (0 = all cores); overrides LEOCOV_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic coverage over the SINR grid.
    Coverage(CoverageArgs),
    /// Analytic coverage against Monte Carlo, with a pass flag per point.
    Validate(ValidateArgs),
    /// Optimal cluster size against constellation density.
    OptimalK(OptimalKArgs),
    /// Distance densities with a simulated histogram.
    Dists(DistsArgs),
    /// Ergodic spectral efficiency per cluster size.
    ErgodicSe(ErgodicArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Approx,
    Marginal,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Relative distances; replaces run.delta.
    #[arg(long, num_args = 1..)]
    pub delta: Vec<f64>,
    /// "alzer", "unit" or a blend weight in [0, 1]; replaces run.kappa.
    #[arg(long)]
    pub kappa: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulated trials; replaces run.trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Relative distances; replaces run.delta.
    #[arg(long, num_args = 1..)]
    pub delta: Vec<f64>,
    /// Slack on top of the MC half-width; replaces run.allowance.
    #[arg(long)]
    pub allowance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimalKArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mean visible counts to sweep; replaces network.mean_visible.
    #[arg(long, num_args = 1..)]
    pub densities: Option<Vec<f64>>,
    /// Antenna counts; replaces network.n_t.
    #[arg(long = "n-t", num_args = 1..)]
    pub n_t: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichDist {
    Nearest,
    Kth,
    Delta,
}

#[derive(Debug, Args)]
pub struct DistsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub which: WhichDist,
    /// Relative distance bounding the K-th distance from below; replaces run.delta.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ErgodicArgs {
    #[command(flatten)]
    pub common: Common,
    /// Add Monte Carlo columns.
    #[arg(long)]
    pub mc: bool,
    #[arg(long)]
    pub trials: Option<u64>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("leocov: {}", e.message);
            e.code
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{THREADS_ENV}: expected a thread count, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Coverage(a) => {
            let mut cfg = load(&a.common)?;
            if !a.delta.is_empty() {
                cfg.run.delta = a.delta.clone();
            }
            if let Some(k) = &a.kappa {
                cfg.run.kappa = KappaChoice::parse(k);
            }
            commands::coverage(&cfg, a.mode)?.write(a.common.out.as_deref())
        }
        Command::Validate(a) => {
            let mut cfg = load(&a.common)?;
            if let Some(t) = a.trials {
                cfg.run.trials = t;
            }
            if !a.delta.is_empty() {
                cfg.run.delta = a.delta.clone();
            }
            if let Some(x) = a.allowance {
                cfg.run.allowance = x;
            }
            let report = commands::validate(&cfg)?;
            report.table.write(a.common.out.as_deref())?;
            eprintln!("{}", report.summary);
            if report.failures > 0 {
                return Err(CliError::validation(format!(
                    "{} of {} points outside the Monte Carlo interval",
                    report.failures,
                    report.table.len()
                )));
            }
            Ok(())
        }
        Command::OptimalK(a) => {
            let mut cfg = load(&a.common)?;
            if !a.n_t.is_empty() {
                cfg.network.n_t = config::OneOrMany::Many(a.n_t.clone());
            }
            let densities = match &a.densities {
                Some(d) => d.clone(),
                None => cfg.network.mean_visible.into_iter().collect(),
            };
            commands::optimal_k(&cfg, &densities)?.write(a.common.out.as_deref())
        }
        Command::Dists(a) => {
            let mut cfg = load(&a.common)?;
            if let Some(t) = a.trials {
                cfg.run.trials = t;
            }
            if let Some(d) = a.delta {
                cfg.run.delta = vec![d];
            }
            commands::dists(&cfg, a.which, a.bins)?.write(a.common.out.as_deref())
        }
        Command::ErgodicSe(a) => {
            let mut cfg = load(&a.common)?;
            if let Some(t) = a.trials {
                cfg.run.trials = t;
            }
            commands::ergodic_se(&cfg, a.mc)?.write(a.common.out.as_deref())
        }
    }
}
