use thiserror::Error;

/// Errors raised by the lab. Mathematical precondition failures (no pivot,
/// branch crossings) are kept distinct from I/O and parse failures so the
/// command line can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expression `{expr}` is undefined at xi = {xi:?}")]
    EvalDomain { xi: Vec<i64>, expr: String },

    #[error("need at least {needed} complete dyadic annuli, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("grid size {0} is not a power of two")]
    NonPowerOfTwo(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigen solver failed at xi = {xi:?}, t index {t_index} (residual {residual:e})")]
    EigenSolverFailure { xi: Vec<i64>, t_index: usize, residual: f64 },

    #[error("no admissible pivot for branch {branch} at xi = {xi:?} (best ratio {best:e})")]
    NoPivot { xi: Vec<i64>, branch: usize, best: f64 },

    #[error("eigenvalue branches {pair:?} cross at xi = {xi:?}, t index {t_index}")]
    BranchCrossing { xi: Vec<i64>, pair: (usize, usize), t_index: usize },

    #[error("eigenvalue branches cross along the epsilon grid at xi = {xi:?}")]
    BranchCrossingAcrossEpsilon { xi: Vec<i64> },

    #[error("matrices {pair:?} do not commute (relative commutator {norm:e})")]
    NotCommuting { pair: (usize, usize), norm: f64 },

    #[error("residual {residual:e} exceeds tolerance {tol:e}: {context}")]
    ResidualTooLarge { residual: f64, tol: f64, context: String },

    #[error("mode is resonant: distance {distance:e} to the integers")]
    Resonant { distance: f64 },

    #[error("fixed-point iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("witness list is empty")]
    EmptyWitnessList,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of mathematical preconditions rather than of input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NoPivot { .. } | Error::BranchCrossing { .. } | Error::BranchCrossingAcrossEpsilon { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownIdentifier(_) => "UnknownIdentifier",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::EvalDomain { .. } => "EvalDomainError",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NonPowerOfTwo(_) => "NonPowerOfTwo",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::GridMismatch(_) => "GridMismatch",
            Error::EigenSolverFailure { .. } => "EigenSolverFailure",
            Error::NoPivot { .. } => "NoPivot",
            Error::BranchCrossing { .. } => "BranchCrossing",
            Error::BranchCrossingAcrossEpsilon { .. } => "BranchCrossingAcrossEpsilon",
            Error::NotCommuting { .. } => "NotCommuting",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::Resonant { .. } => "Resonant",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::EmptyWitnessList => "EmptyWitnessList",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
