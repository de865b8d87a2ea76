use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by estimation, tuning, and simulation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (dimensions, ranges, flags).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A truncated eigendecomposition budget was too small: eigenvalues past
    /// the budget still exceed the threshold. `found` is the number of
    /// above-threshold eigenvalues seen so far; callers may retry with a
    /// larger budget.
    #[error("svd budget exceeded: {found} eigenvalues above threshold so far")]
    BudgetExceeded { found: usize },

    /// An iterative numerical routine failed to converge or produced
    /// non-finite values.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The refitting design matrix is numerically rank deficient (e.g.
    /// duplicate eigenvectors), so eigenvalues cannot be re-estimated.
    #[error("degenerate refit design: {0}")]
    DegenerateDesign(String),

    /// Every cross-validation fold was skipped; no candidate could be scored.
    #[error("cross-validation failed: {0}")]
    CvFailed(String),

    /// A hold-out request would remove more entries than are observed.
    #[error("hold-out too large: {0}")]
    HoldoutTooLarge(String),
}
