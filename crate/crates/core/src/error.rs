use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Variants are grouped by how a caller should react: `InvalidInput` and
/// friends mean the caller built a bad object (fix the parameters),
/// `BadFormat`/`UnsortedStream` mean external data are corrupt, and
/// `Numerical` means an algorithm failed to meet its own contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not Hermitian: max |m - m^H| entry = {deviation:.3e}")]
    NonHermitian { deviation: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration step too coarse: dt = {dt} exceeds sigma_min/10 = {limit}")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("degenerate fringe fit: {0}")]
    DegenerateFit(String),

    #[error("time-tag stream not sorted: record {index} has a timestamp earlier than its predecessor")]
    UnsortedStream { index: usize },

    #[error("bad stream format at byte {offset}: {reason}")]
    BadFormat { offset: u64, reason: String },

    #[error("measurement settings are not tomographically complete: measurement-map rank {rank} < {needed}")]
    IncompleteSettings { rank: usize, needed: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
