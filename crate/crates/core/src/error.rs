use thiserror::Error;

pub type Result<T> = std::result::Result<T, CocaError>;

#[derive(Debug, Error)]
pub enum CocaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Iterative kernel ran out of iterations. Carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive definite: pivot {pivot} has value {value:.3e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("objective increased at iteration {iteration}: {before:.17e} -> {after:.17e}")]
    ObjectiveIncreased {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("parse error at row {row}{}: {message}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        col: Option<usize>,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CocaError {
    pub fn read(path: &std::path::Path, source: std::io::Error) -> Self {
        CocaError::Read {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            CocaError::InvalidInput(_) => 2,
            CocaError::NotConverged { .. } | CocaError::ObjectiveIncreased { .. } => 4,
            CocaError::DimensionMismatch(_)
            | CocaError::Degenerate(_)
            | CocaError::NotPositiveDefinite { .. }
            | CocaError::Singular(_)
            | CocaError::Parse { .. }
            | CocaError::EmptyInput(_)
            | CocaError::Stratification(_)
            | CocaError::Read { .. }
            | CocaError::Json(_) => 3,
            CocaError::Io(_) => 5,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            CocaError::InvalidInput(_) => "invalid_input",
            CocaError::DimensionMismatch(_) => "dimension_mismatch",
            CocaError::NotConverged { .. } => "not_converged",
            CocaError::Degenerate(_) => "degenerate",
            CocaError::NotPositiveDefinite { .. } => "not_positive_definite",
            CocaError::Singular(_) => "singular",
            CocaError::ObjectiveIncreased { .. } => "objective_increased",
            CocaError::Parse { .. } => "parse",
            CocaError::EmptyInput(_) => "empty_input",
            CocaError::Stratification(_) => "stratification",
            CocaError::Read { .. } => "read",
            CocaError::Io(_) => "io",
            CocaError::Json(_) => "json",
        }
    }
}
