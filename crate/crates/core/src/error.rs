//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading, modeling, or reconstructing
/// spectra.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad caller input: out-of-range order, even smoothing window, band
    /// off the grid, mismatched vector lengths and the like.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A spectrum or dataset violates a structural invariant.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Text input could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Raw samples do not cover the requested wavelength range.
    #[error(
        "coverage gap: raw data spans {raw_lo}-{raw_hi} nm but the grid \
         requires {need_lo}-{need_hi} nm (uncovered: {uncovered})"
    )]
    CoverageGap {
        raw_lo: f64,
        raw_hi: f64,
        need_lo: f64,
        need_hi: f64,
        uncovered: String,
    },

    /// File-level failure, tagged with the offending path.
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    /// The numerical core failed: eigensolver non-convergence, an
    /// orthonormality check out of tolerance, SVD breakdown.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input is structurally fine but degenerate for the requested
    /// operation: all-zero variance, all wavelengths excluded, rank zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::File {
            path: path.into(),
            message: msg.to_string(),
        }
    }

    /// Coarse classification used by callers that map errors to process
    /// exit codes.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Degenerate(_))
    }

    /// True for errors caused by malformed or missing input data rather
    /// than by caller configuration.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_)
                | Error::Parse { .. }
                | Error::CoverageGap { .. }
                | Error::File { .. }
        )
    }
}
