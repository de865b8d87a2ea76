//! Error type for the command-line layer, carrying the process exit code.
//!
//! Exit codes: `0` success, `2` validation error (bad flags, malformed
//! files, impossible requests), `3` numerical failure (an estimation
//! routine diverged or hit a degenerate system).

use std::fmt;

/// A command failure with its exit-code category.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: flags, file contents, shapes, ranges. Exit code 2.
    Validation(String),
    /// An iterative routine failed numerically. Exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Numerical(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<multiness::Error> for CliError {
    fn from(e: multiness::Error) -> Self {
        use multiness::Error as E;
        match e {
            E::InvalidInput(_) | E::CvFailed(_) | E::HoldoutTooLarge(_) => {
                CliError::Validation(e.to_string())
            }
            E::NumericalFailure(_) | E::BudgetExceeded { .. } | E::DegenerateDesign(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
