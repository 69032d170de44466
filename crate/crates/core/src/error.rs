use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not acyclic: {0}")]
    Cyclic(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("rank-deficient regressors: {0}")]
    RankDeficient(String),

    #[error("barycenter did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver diverged at outer iteration {}", .trace.len())]
    Diverged { trace: Vec<f64> },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("radius undefined for `{field}`: log(c/eta) must be positive")]
    RadiusUndefined { field: String },

    #[error("{0}")]
    Eval(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}
