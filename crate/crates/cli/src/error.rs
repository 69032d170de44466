use std::fmt;
use std::path::Path;

use diroca_core::Error;

/// Process exit codes.
pub const USAGE: i32 = 1;
pub const CONFIG: i32 = 2;
pub const SOLVER: i32 = 3;
pub const MISSING: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: USAGE, message: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: CONFIG, message: msg.into() }
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Self { code: SOLVER, message: msg.into() }
    }

    pub fn missing(msg: impl Into<String>) -> Self {
        Self { code: MISSING, message: msg.into() }
    }

    /// Wraps a failed read of something an earlier command should have produced.
    pub fn artifact(path: &Path, err: impl fmt::Display) -> Self {
        Self::missing(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } | Error::NoConvergence { .. } => SOLVER,
            _ => CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
