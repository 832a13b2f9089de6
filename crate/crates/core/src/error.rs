use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration supplied by the caller.
    Usage,
    /// Input data could not be read or failed validation.
    Data,
    /// A property the toolkit guarantees did not hold.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("feature set must have at least one token and one dimension (got V={tokens}, d={dim})")]
    EmptyFeatureSet { tokens: usize, dim: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite {what} entry at index {index}")]
    NonFiniteEntry { what: &'static str, index: usize },
    #[error("negative attention {value} at index {index}")]
    NegativeAttention { index: usize, value: f32 },

    #[error("bad magic {found:?}, expected \"PCF1\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported feature file version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated feature file: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: candidate probabilities sum to {sum}, not 1")]
    UnnormalizedProbs { line: usize, sum: f64 },
    #[error("line {line}: true label {label:?} is not a candidate")]
    UnknownTrueLabel { line: usize, label: String },
    #[error("line {line}: stored correct flag disagrees with argmax of probabilities")]
    CorrectFlagMismatch { line: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("budget K={budget} exceeds token count V={tokens}")]
    BudgetExceedsTokens { budget: usize, tokens: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("gap power must be finite and at least 1, got {0}")]
    InvalidGapPower(f64),
    #[error("index {index} out of range for {size} tokens")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("probability mass is zero")]
    ZeroMass,
    #[error("metric requires at least one record")]
    EmptyInput,
    #[error("coverage must lie in (0, 1], got {0}")]
    CoverageOutOfRange(f64),
    #[error("temperature must be finite and positive, got {0}")]
    InvalidTemperature(f64),
    #[error("need at least {folds} records for {folds}-fold cross-validation, got {records}")]
    TooFewRecords { records: usize, folds: usize },
    #[error("invalid metric option: {0}")]
    InvalidOption(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: example {example_id:?} has no feature file")]
    MissingFeatures { path: PathBuf, example_id: String },
    #[error("kept token set is empty")]
    EmptyKept,
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            BudgetExceedsTokens { .. }
            | ZeroBudget
            | InvalidAlpha(_)
            | InvalidGapPower(_)
            | CoverageOutOfRange(_)
            | InvalidTemperature(_)
            | TooFewRecords { .. }
            | InvalidOption(_)
            | InvalidConfig(_) => ErrorKind::Usage,
            Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
