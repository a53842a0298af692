//! Command-line driver: calibration demos, the regression simulation
//! study, mismatch diagnostics, and the two-phase sampler demo.
//!
//! Every subcommand resolves its configuration from built-in defaults, an
//! optional key=value config file, the BAYESBAG_SEED environment variable
//! (master seed only), and command-line flags, in that order of
//! precedence. The resolved configuration is written next to the outputs,
//! and every output is a pure function of it: re-running a command, with
//! any thread count, reproduces the files byte for byte.
//!
//! Exit codes: 0 success, 2 configuration or input-format error, 3
//! runtime/numeric error.

mod commands;
mod config;
mod jsonfmt;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<bayesbag::Error> for CliError {
    fn from(e: bayesbag::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "bayesbag", version, about = "Bagged-posterior experiments and diagnostics")]
struct Cli {
    /// Key=value config file (see README for the format)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master seed for all randomness
    #[arg(long, global = true)]
    master_seed: Option<u64>,

    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard vs bagged moments and interval coverage for the Gaussian
    /// location model, exact and Monte Carlo
    GlDemo(commands::gl_demo::GlDemoArgs),
    /// The linear-regression simulation study over a settings grid
    LinregSim(commands::linreg_sim::LinregSimArgs),
    /// Mismatch-index report from conjugate inputs or draw files
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Two-phase sampler on a Gaussian-location or logistic target
    SamplerDemo(commands::sampler_demo::SamplerDemoArgs),
}

/// Global settings shared by every subcommand.
pub struct Ctx {
    pub file: FileConfig,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
}

impl Ctx {
    /// Global entries echoed into each resolved-config file.
    fn global_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("master_seed", self.master_seed.to_string()),
            ("threads", self.threads.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }
}

const DEFAULT_MASTER_SEED: u64 = 42;

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "gl-demo",
        &["n", "m", "m_factor", "v", "v0", "true_var_scale", "true_mean", "b", "replications", "out"],
    ),
    (
        "linreg-sim",
        &["n", "d", "settings", "lambda", "a0", "b0", "replicates", "b", "noise_sd", "csv_out", "summary_out"],
    ),
    (
        "diagnose",
        &["mode", "data", "v", "v0", "m", "lambda", "a0", "b0", "b", "std_draws", "bag_draws", "n", "function", "out"],
    ),
    (
        "sampler-demo",
        &["target", "n", "dim", "t_large", "t_small", "b", "m", "prior_sd", "v", "v0", "true_var_scale", "out"],
    ),
];

fn build_ctx(cli: &Cli) -> Result<Ctx, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            FileConfig::parse(&text)?
        }
        None => FileConfig::default(),
    };
    file.validate(SCHEMA)?;

    let mut master_seed = config::resolve(
        file.get("", "master_seed"),
        None,
        DEFAULT_MASTER_SEED,
        "master_seed",
    )?;
    if let Ok(env_seed) = std::env::var("BAYESBAG_SEED") {
        master_seed = env_seed
            .parse()
            .map_err(|_| CliError::config(format!("invalid BAYESBAG_SEED '{env_seed}'")))?;
    }
    if let Some(flag_seed) = cli.master_seed {
        master_seed = flag_seed;
    }

    let threads = config::resolve(file.get("", "threads"), cli.threads, 0usize, "threads")?;
    let out_dir = match &cli.out_dir {
        Some(p) => p.clone(),
        None => PathBuf::from(
            file.get("", "out_dir").unwrap_or("out"),
        ),
    };
    Ok(Ctx { file, master_seed, out_dir, threads })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = build_ctx(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    match &cli.command {
        Command::GlDemo(args) => commands::gl_demo::run(&ctx, args),
        Command::LinregSim(args) => commands::linreg_sim::run(&ctx, args),
        Command::Diagnose(args) => commands::diagnose::run(&ctx, args),
        Command::SamplerDemo(args) => commands::sampler_demo::run(&ctx, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Shared flag container for declaring typed overrides tersely.
#[derive(Args, Debug, Default)]
pub struct NoArgs {}
