use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("concept sets differ: {left} vs {right}")]
    ConceptSetMismatch { left: String, right: String },

    #[error("every concept was filtered out (min share {min_share})")]
    AllFiltered { min_share: f64 },

    #[error("k_max {k_max} must be smaller than the filtered concept count {size}")]
    KMaxTooLarge { k_max: usize, size: usize },

    #[error("axis {axis} out of range 1..{size}")]
    InvalidAxis { axis: usize, size: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("poet `{0}` has no non-abstained verses")]
    NoEvidence(String),

    #[error("unknown poet `{0}`")]
    UnknownPoet(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("misaligned verse refs: {}", .0.join(", "))]
    Misaligned(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the caller or the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::UnknownLabel(_)
                | Error::Misaligned(_)
                | Error::NoEvidence(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
