//! Crate-wide error type.
//!
//! Errors are grouped by the way callers need to react to them: bad user
//! input (`Config`), an inconsistent or degenerate geometry description
//! (`Geometry`), a breakdown inside a numerical algorithm (`Numerical`), a
//! failed cross-check between two independent computations (`Oracle`), and
//! plain I/O problems.  The CLI maps these groups onto its exit codes.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent user-supplied configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Geometry construction or query failed (degenerate patch, point not
    /// locatable, non-matching interface, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A numerical algorithm broke down (singular matrix, no convergence,
    /// invalid Jacobian, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An independent cross-check (dual-route validation) disagreed beyond
    /// its tolerance.
    #[error("oracle mismatch: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn oracle(msg: impl Into<String>) -> Self {
        Error::Oracle(msg.into())
    }
}
