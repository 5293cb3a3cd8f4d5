use std::fmt;

use clcons::Error;

/// Failures of a run, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, parameters or files: exit 2.
    Config(String),
    /// The state left the admissible domain while computing: exit 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. }
            | Error::OutsideDomain { .. }
            | Error::DomainViolation { .. }
            | Error::TimeStepCollapse { .. }
            | Error::NoConvergence(_) => Self::Runtime(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}
