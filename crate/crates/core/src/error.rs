use thiserror::Error;

use crate::solver::SolverStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unseen categorical level {level:?} for M (known levels: {known:?})")]
    UnseenLevel { level: String, known: Vec<String> },

    #[error("basis term `{term}` references {variable}, which is absent")]
    MissingBasisInput { term: String, variable: &'static str },

    #[error("invalid basis specification `{0}`")]
    InvalidBasis(String),

    #[error("rank-deficient design: column {column} (`{name}`) is linearly dependent on earlier columns")]
    RankDeficient { column: usize, name: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dataset failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<crate::data::Violation>),

    #[error("residual is not finite at theta = {theta:?}")]
    NonFiniteResidual { theta: Vec<f64> },

    #[error("moment solver did not converge: status {status:?}, residual norm {residual_norm:.3e}")]
    SolverFailed { status: SolverStatus, residual_norm: f64 },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("completeness fails at x = {x}: rank {rank} < {needed}")]
    Completeness { x: f64, rank: usize, needed: usize },

    #[error("zero-probability conditioning event: {0}")]
    ZeroDenominator(String),

    #[error("too many failed bootstrap resamples: {failed} of {total}")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
