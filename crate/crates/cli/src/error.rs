use std::fmt;
use std::process::ExitCode;

use gnssbench::align::AlignError;
use gnssbench::continuity::ContinuityError;
use gnssbench::ingest::IngestError;
use gnssbench::perfmap::PerfMapError;
use gnssbench::stats::StatsError;

/// Failure classes of the command line, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, including bad flags and config.
    Format(String),
    /// Nothing (or too little) to compute on, or a degenerate system.
    Insufficient(String),
    Io(String),
    /// A selftest tolerance was violated.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Check(_) => 1,
            CliError::Format(_) => 2,
            CliError::Insufficient(_) => 3,
            CliError::Io(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Format(m) => write!(f, "input format error: {m}"),
            CliError::Insufficient(m) => write!(f, "insufficient data: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Check(m) => write!(f, "selftest failed: {m}"),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Format(other.to_string()),
        }
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        CliError::Insufficient(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Thresholds(m) => CliError::Format(m),
            other => CliError::Insufficient(other.to_string()),
        }
    }
}

impl From<ContinuityError> for CliError {
    fn from(e: ContinuityError) -> Self {
        match e {
            ContinuityError::Window(_) => CliError::Format(e.to_string()),
            other => CliError::Insufficient(other.to_string()),
        }
    }
}

impl From<PerfMapError> for CliError {
    fn from(e: PerfMapError) -> Self {
        match e {
            PerfMapError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Format(other.to_string()),
        }
    }
}
