use std::path::PathBuf;

use thiserror::Error;

/// Every failure surfaced by the library.
///
/// `code()` gives a stable, machine-parsable identifier that the CLI prints
/// on stderr.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("complex spectrum: eigenvalue {re} {im:+}i has a non-negligible imaginary part")]
    ComplexSpectrum { re: f64, im: f64 },
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model format: {0}")]
    Format(String),
    #[error("repetition {rep} (seed {seed}): {source}")]
    Repetition {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::SingularMatrix(_) => "SINGULAR_MATRIX",
            Error::ComplexSpectrum { .. } => "COMPLEX_SPECTRUM",
            Error::RankDeficient(_) => "RANK_DEFICIENT",
            Error::Schema(_) => "SCHEMA_ERROR",
            Error::UndefinedMetric(_) => "UNDEFINED_METRIC",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Io { .. } => "IO_ERROR",
            Error::Format(_) => "FORMAT_ERROR",
            Error::Repetition { source, .. } => source.code(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
