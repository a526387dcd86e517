//! Front end for the renormalization laboratory: configuration, the table
//! commands and the verification suite.

pub mod commands;
pub mod config;
pub mod record;
pub mod verify;

use config::{Format, RunConfig};
use record::ResultRecord;
use std::fmt;
use std::io::Write;
use verify::VerifyReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(renorm_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<renorm_core::Error> for CliError {
    fn from(e: renorm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use renorm_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(
                E::AlphaOutOfRange(_) | E::InvalidWindow { .. } | E::LevelMismatch { .. } | E::Precondition(_),
            ) => EXIT_USAGE,
            CliError::Core(
                E::RootNotConverged { .. }
                | E::InverseIteration { .. }
                | E::ProductDivergence { .. }
                | E::Indeterminacy,
            ) => EXIT_NONCONVERGENCE,
            CliError::Core(E::InsufficientRootWindow { .. } | E::NotInSupport(_)) => EXIT_CHECK_FAILED,
            CliError::Io(_) => EXIT_CHECK_FAILED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Ids,
    Plane,
    Verify,
    Dichotomy,
}

/// Result of one command.
#[derive(Debug, Clone)]
pub enum Output {
    Table(ResultRecord),
    Report(VerifyReport),
}

impl Output {
    pub fn exit_code(&self) -> i32 {
        match self {
            Output::Report(r) if !r.passed => EXIT_CHECK_FAILED,
            _ => EXIT_OK,
        }
    }

    /// Tables default to CSV, reports are always JSON.
    pub fn write<W: Write>(&self, format: Option<Format>, mut out: W) -> Result<(), CliError> {
        match self {
            Output::Table(rec) => match format.unwrap_or(Format::Csv) {
                Format::Csv => rec.write_csv(out)?,
                Format::Json => rec.write_json(out)?,
            },
            Output::Report(rep) => out.write_all(rep.to_json().as_bytes())?,
        }
        Ok(())
    }

    pub fn notes(&self) -> &[String] {
        match self {
            Output::Table(rec) => &rec.notes,
            Output::Report(_) => &[],
        }
    }
}

/// Validate `cfg` and run `command` on a pool of `cfg.jobs` threads.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cfg.jobs)))?;
    pool.install(|| match command {
        Command::Spectrum => commands::cmd_spectrum(cfg).map(Output::Table),
        Command::Ids => commands::cmd_ids(cfg).map(Output::Table),
        Command::Plane => commands::cmd_plane(cfg).map(Output::Table),
        Command::Dichotomy => commands::cmd_dichotomy(cfg).map(Output::Table),
        Command::Verify => verify::cmd_verify(cfg).map(Output::Report),
    })
}
