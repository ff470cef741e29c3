use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MiceError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("transition row P[{state}][{action}] sums to {sum:.15e}, expected 1")]
    Stochasticity { state: usize, action: usize, sum: f64 },

    #[error("negative entry {value:.15e} in {field}[{state}][{action}]")]
    NegativeCost {
        field: &'static str,
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("invalid distribution for {what}: sum {sum:.15e}")]
    InvalidDistribution { what: String, sum: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("intrinsic cost missing on transition from state {state}, action {action}")]
    MissingIntrinsicCost { state: usize, action: usize },

    #[error("value baseline has no entry for state {state}")]
    BaselineCoverage { state: usize },

    #[error("linear system is singular or ill-conditioned (residual {residual:.3e})")]
    Singular { residual: f64 },

    #[error("numerical divergence in {0}")]
    Divergence(&'static str),

    #[error("trust-region subproblem infeasible: c = {c:.6e}, v = {v:.6e}")]
    Infeasible { c: f64, v: f64 },

    #[error("constraint gradient vanishes, no recovery direction (v = {v:.3e})")]
    NoDescentDirection { v: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("csv error at {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl MiceError {
    /// Stable short identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            MiceError::Io { .. } => "io",
            MiceError::Schema { .. } => "schema",
            MiceError::Stochasticity { .. } => "stochasticity",
            MiceError::NegativeCost { .. } => "negative_cost",
            MiceError::InvalidDistribution { .. } => "invalid_distribution",
            MiceError::Dimension { .. } => "dimension",
            MiceError::InvalidArgument(_) => "invalid_argument",
            MiceError::MissingIntrinsicCost { .. } => "missing_intrinsic_cost",
            MiceError::BaselineCoverage { .. } => "baseline_coverage",
            MiceError::Singular { .. } => "singular",
            MiceError::Divergence(_) => "divergence",
            MiceError::Infeasible { .. } => "infeasible",
            MiceError::NoDescentDirection { .. } => "no_descent_direction",
            MiceError::EmptyBatch => "empty_batch",
            MiceError::Csv { .. } => "csv",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MiceError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        MiceError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, MiceError>;
