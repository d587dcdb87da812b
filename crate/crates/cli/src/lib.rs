//! Configuration-driven experiment runner behind the `dynascore` binary.
//!
//! Exit codes: 0 success, 1 verification failure or I/O error, 2 bad
//! configuration, 3 unsupported auction combination, 4 solver did not
//! converge (outputs are still written).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError};

#[derive(Parser)]
#[command(name = "dynascore", version, about = "Dynamically scored ad auction experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo revenue of one or more auction arms on common random numbers.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Symmetric first-price equilibrium bids by best-response iteration.
    Equilibrium {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form pre-news value function against the dynamic-programming oracle.
    ValueFunction {
        #[command(flatten)]
        common: Common,
        /// `first` or `second`.
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        b1: Option<f64>,
        #[arg(long)]
        b2: Option<f64>,
        /// Third bid; selects the three-bidder second-price problem.
        #[arg(long)]
        b3: Option<f64>,
        #[arg(long)]
        reserve: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Runs the acceptance checks and writes `verify_report.json`.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl From<dynascore::Error> for CliError {
    fn from(e: dynascore::Error) -> Self {
        use dynascore::Error as E;
        match e {
            E::UnsupportedCombination(msg) => CliError::Unsupported(msg),
            E::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            E::InvalidParameter { field, reason } => CliError::Config(ConfigError {
                line: None,
                field: field.to_string(),
                reason,
            }),
            E::Table(_) | E::Domain(_) | E::OutOfSupport { .. } | E::ZeroBid => CliError::Config(ConfigError {
                line: None,
                field: "config".into(),
                reason: e.to_string(),
            }),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Io(_) | CliError::Runtime(_) | CliError::VerifyFailed => 1,
        }
    }
}

fn load(common: &Common) -> Result<(Config, PathBuf), CliError> {
    let (mut cfg, base) = match &common.config {
        Some(path) => (
            Config::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (Config::default(), PathBuf::new()),
    };
    if let Some(seed) = common.seed {
        cfg.set("run.seed", seed);
    }
    Ok((cfg, base))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config(ConfigError {
            line: None,
            field: "--threads".into(),
            reason: "must be at least 1".into(),
        }));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let finished = match cli.command {
        Command::Simulate { common } => {
            let (cfg, base) = load(&common)?;
            commands::simulate(&cfg, &base, &common.out)?
        }
        Command::Equilibrium { common } => {
            let (cfg, base) = load(&common)?;
            commands::equilibrium(&cfg, &base, &common.out)?
        }
        Command::ValueFunction {
            common,
            format,
            b1,
            b2,
            b3,
            reserve,
            r,
            lambda,
            p,
        } => {
            let (mut cfg, _) = load(&common)?;
            if let Some(f) = format {
                cfg.set("value.format", f);
            }
            for (key, x) in [
                ("value.b1", b1),
                ("value.b2", b2),
                ("value.b3", b3),
                ("value.reserve", reserve),
                ("value.r", r),
                ("value.lambda", lambda),
                ("value.p", p),
            ] {
                if let Some(x) = x {
                    cfg.set(key, x);
                }
            }
            commands::value_function(&cfg, &common.out)?
        }
        Command::Verify { common } => {
            let (cfg, _) = load(&common)?;
            if !commands::verify(&cfg, &common.out)? {
                return Err(CliError::VerifyFailed);
            }
            return Ok(());
        }
    };
    match finished.not_converged {
        Some(msg) => Err(CliError::NotConverged(msg)),
        None => Ok(()),
    }
}

fn threads(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::Simulate { common }
        | Command::Equilibrium { common }
        | Command::ValueFunction { common, .. }
        | Command::Verify { common } => common.threads,
    }
}

/// Parses `args` (including the program name), runs the command on a worker
/// pool of the requested size and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = pool(threads(&cli)).and_then(|pool| pool.install(|| dispatch(cli)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dynascore: {e}");
            e.exit_code()
        }
    }
}
