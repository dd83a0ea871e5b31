//! Command-line experiment harness for the `hovi` solver library.
//!
//! The binary reads a JSON experiment config and writes CSV traces and JSON
//! reports.  Exit codes: 0 success, 1 configuration error (malformed or
//! invalid config, unknown problem, bad arguments), 2 numerical failure
//! (inner solve or integration breakdown).

use std::fmt;
use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{ExperimentConfig, Mode};

/// Parsed command-line flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config_path: PathBuf,
    /// Overrides the config's output directory when set.
    pub out_dir: Option<PathBuf>,
    /// Overrides solver/verifier seeds when set.
    pub seed_override: Option<u64>,
    /// Suppress informational stdout lines.
    pub quiet: bool,
}

/// Everything that can go wrong running a command, partitioned by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Config or argument problems: exit code 1.
    Usage(String),
    /// Library errors, mapped per variant.
    Hovi(hovi::Error),
    /// Filesystem problems reading configs or writing outputs: exit code 1.
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Hovi(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<hovi::Error> for CliError {
    fn from(e: hovi::Error) -> Self {
        CliError::Hovi(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// Map to the documented exit codes: numerical breakdowns are 2,
    /// everything else is a config error (1).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hovi(
                hovi::Error::Subproblem { .. }
                | hovi::Error::Integration { .. }
                | hovi::Error::Singularity(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// Read and structurally validate an experiment config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", path.display()))
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("cannot parse config {}: {e}", path.display()))
    })?;
    config.validate()?;
    Ok(config)
}

/// Run one subcommand end to end and return the process exit code.
pub fn execute(requested: Mode, inv: &Invocation) -> i32 {
    let result =
        load_config(&inv.config_path).and_then(|c| commands::execute_mode(requested, &c, inv));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
