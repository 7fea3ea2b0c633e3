//! Command-line front end: moment tables, Monte Carlo validation, RMS
//! surfaces and sample-size plans, each run recorded in a replayable manifest.

mod commands;
mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use report::{fmt6, Manifest};

/// Seed used when neither `--seed` nor `ERRMOMENTS_SEED` is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(name = "errmoments", version, about = "Moments of the Bayesian MMSE error estimator for LDA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model specification (JSON, full or reduced form).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true, env = "ERRMOMENTS_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "name")]
pub enum Command {
    /// Analytic moment matrix, plus asymptotic limits when the config has a profile.
    Moments,
    /// Compare analytic moments with Monte Carlo estimates.
    Validate(McArgs),
    /// Run the Monte Carlo oracle alone.
    Mc(McArgs),
    /// RMS over a (p, n) grid.
    Surface(SurfaceArgs),
    /// Minimum sample size grid over (tau, p).
    Plan(PlanArgs),
    /// Re-run the invocation recorded in a manifest.
    #[serde(skip)]
    Replay {
        /// Path to a manifest.json written by an earlier run.
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Conditional,
    Unconditional,
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<errmoments::Mode> {
        use errmoments::Mode::*;
        match self {
            Self::Conditional => vec![Conditional],
            Self::Unconditional => vec![Unconditional],
            Self::Both => vec![Conditional, Unconditional],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerArg {
    SampleMeans,
    FullSample,
}

impl From<SamplerArg> for errmoments::Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::SampleMeans => Self::SampleMeans,
            SamplerArg::FullSample => Self::FullSample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    /// Inner replications [default: 10000 conditional, 300 unconditional].
    #[arg(long)]
    pub t1: Option<u64>,
    /// Outer replications, unconditional only [default: 300].
    #[arg(long)]
    pub t2: Option<u64>,
    #[arg(long, value_enum, default_value = "sample-means")]
    pub sampler: SamplerArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub mode: errmoments::Mode,
    /// Prior-to-sample ratio; the prior certainty per class is beta * n / 2.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Squared Mahalanobis distance between the true means (conditional).
    #[arg(long)]
    pub delta2: Option<f64>,
    /// Squared Mahalanobis distance between the prior means (unconditional).
    #[arg(long = "Delta2")]
    #[serde(rename = "Delta2")]
    pub prior_delta2: Option<f64>,
    /// Dimensions as `start:end[:step]` or a single value.
    #[arg(long, default_value = "4:200:2")]
    pub p_range: String,
    /// Even total sample sizes as `start:end[:step]` or a single value.
    #[arg(long, default_value = "4:200:2")]
    pub n_range: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Literal,
    Safe,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Comma-separated RMS targets [default: the built-in grid for each mode].
    #[arg(long, value_delimiter = ',')]
    pub tau_list: Option<Vec<f64>>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128")]
    pub p_list: Vec<u32>,
    /// Largest sample size scanned.
    #[arg(long, default_value_t = 10_000)]
    pub n_max: u32,
    #[arg(long, value_enum, default_value = "safe")]
    pub rule: RuleArg,
    /// Shorthand for `--rule safe`.
    #[arg(long, conflicts_with = "rule")]
    #[serde(skip)]
    pub safe: bool,
    /// Look-ahead of the safe rule.
    #[arg(long, default_value_t = errmoments::planner::DEFAULT_HORIZON)]
    pub horizon: u32,
}

/// A fully resolved run: everything needed to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: Command,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config_path: Option<PathBuf>,
    /// Verbatim text of the config file.
    pub config_text: Option<String>,
}

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Validation,
    Numeric,
    NotFound,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::Validation, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::Numeric, message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::NotFound, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Validation => 1,
            FailureKind::Numeric => 2,
            FailureKind::NotFound => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<errmoments::Error> for CliError {
    fn from(e: errmoments::Error) -> Self {
        use errmoments::Error::*;
        match e {
            Model(_) | Config(_) => Self::validation(e.to_string()),
            Numeric(_) | Inconsistent(_) | DegenerateSample => Self::numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::validation(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::validation(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::validation(format!("json error: {e}"))
    }
}

/// What a successful or partially successful run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    /// Text also written to `summary.txt` when the subcommand has one.
    pub summary: String,
    /// Set when outputs were written but some part of the run failed.
    pub deferred: Option<String>,
    pub deferred_kind: Option<FailureKind>,
}

impl Invocation {
    /// Resolve parsed arguments, reading the config file and the seed fallback.
    pub fn resolve(cli: Cli) -> Result<(Self, PathBuf), CliError> {
        let out = cli.common.out;
        if let Command::Replay { manifest } = &cli.command {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| CliError::validation(format!("cannot read manifest {}: {e}", manifest.display())))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", manifest.display())))?;
            return Ok((m.invocation, out));
        }
        let config_text = match &cli.common.config {
            Some(path) => Some(
                std::fs::read_to_string(path)
                    .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?,
            ),
            None => None,
        };
        let mut command = cli.command;
        if let Command::Plan(args) = &mut command {
            if args.safe {
                args.rule = RuleArg::Safe;
                args.safe = false;
            }
        }
        let inv = Self {
            command,
            seed: cli.common.seed.unwrap_or(DEFAULT_SEED),
            threads: cli.common.threads,
            config_path: cli.common.config,
            config_text,
        };
        Ok((inv, out))
    }

    pub fn subcommand(&self) -> &'static str {
        match self.command {
            Command::Moments => "moments",
            Command::Validate(_) => "validate",
            Command::Mc(_) => "mc",
            Command::Surface(_) => "surface",
            Command::Plan(_) => "plan",
            Command::Replay { .. } => "replay",
        }
    }
}

/// Execute a resolved invocation, writing all outputs into `out`.
pub fn execute(inv: &Invocation, out: &Path) -> Result<RunReport, CliError> {
    if let Some(k) = inv.threads {
        if k == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
        return pool.install(|| commands::dispatch(inv, out));
    }
    commands::dispatch(inv, out)
}

/// Parse `args`, run, print the summary, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = Invocation::resolve(cli).and_then(|(inv, out)| execute(&inv, &out));
    match result {
        Ok(report) => {
            print!("{}", report.summary);
            match (report.deferred, report.deferred_kind) {
                (Some(msg), Some(kind)) => {
                    let err = CliError { kind, message: msg };
                    eprintln!("error: {err}");
                    err.exit_code()
                }
                _ => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
