use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// min over columns of the largest off-diagonal inner product is not positive.
    #[error("degenerate scale: min_j max_(i != j) x_i'x_j = {0} is not positive")]
    DegenerateScale(f64),

    #[error("divergence: non-finite value at ADMM iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("eigendecomposition failure")]
    Eigendecomposition,

    #[error("degenerate affinity: coefficient matrix is identically zero")]
    DegenerateAffinity,

    #[error("inconsistent side information for pair ({i}, {j})")]
    InconsistentSideInfo { i: usize, j: usize },

    #[error("{path}:{line}{}: {message}", column.map(|c| format!(":{c}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad data, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateScale(_)
            | Error::Divergence { .. }
            | Error::Eigendecomposition
            | Error::DegenerateAffinity => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
