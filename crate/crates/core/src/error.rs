//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by lattice bookkeeping, operator construction, solvers and checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HexError {
    /// A site lies outside a Dirichlet truncation box.
    #[error("site ({n1},{n2},{tag}) lies outside the {size}x{size} Dirichlet box")]
    OutOfBox {
        n1: i64,
        n2: i64,
        tag: &'static str,
        size: usize,
    },
    /// A field has support inside the boundary margin where a stencil would be truncated.
    #[error("field has support within {margin} cells of the Dirichlet boundary")]
    Support { margin: usize },
    /// The expansion of the long-form operator disagrees with a hard-coded coefficient table.
    #[error("coefficient mismatch at (l1,l2)=({l1},{l2}), (i,j)=({i},{j}): table {table}, expansion {expansion}")]
    Mismatch {
        l1: u8,
        l2: u8,
        i: i32,
        j: i32,
        table: i64,
        expansion: i64,
    },
    /// No grid momentum has its band energy inside the requested interval.
    #[error("no grid point has band energy in [{a},{b}] at M={m}")]
    EmptyPreimage { a: f64, b: f64, m: usize },
    /// The spectral projection onto the interval has rank zero.
    #[error("spectral projection onto [{a},{b}] has rank zero")]
    DegenerateProjection { a: f64, b: f64 },
    /// An iterative solver did not reach its residual target.
    #[error("solver stalled after {iterations} iterations at relative residual {residual:e}")]
    SolverStall { iterations: usize, residual: f64 },
    /// A sum identity of the appendix fails.
    #[error("identity {kind} violated for (l1,l2)=({l1},{l2}) at (i,j)=({i},{j}): {s1} vs {s2}")]
    IdentityViolation {
        kind: String,
        l1: u8,
        l2: u8,
        i: i32,
        j: i32,
        s1: i64,
        s2: i64,
    },
    /// Regenerated tables differ from the golden transcription beyond the logged errata.
    #[error("golden mismatch: {0}")]
    GoldenMismatch(String),
    /// Invalid configuration, reported with the offending field.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    /// A precondition of an operation is violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Input/output or serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HexError {
    fn from(e: std::io::Error) -> Self {
        HexError::Io(e.to_string())
    }
}

impl From<csv::Error> for HexError {
    fn from(e: csv::Error) -> Self {
        HexError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HexError {
    fn from(e: serde_json::Error) -> Self {
        HexError::Io(e.to_string())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, HexError>;
