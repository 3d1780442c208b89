use thiserror::Error;

use crate::matrix::Spectrum;
use crate::sdp::SdpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of bounds for dimension {n}")]
    IndexOutOfBounds { index: usize, n: usize },

    #[error("entry ({i}, {j}) = {value} is not a sign (+1/-1)")]
    NotSignMatrix { i: usize, j: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exhaustive enumeration refused for n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations (estimate {estimate})"
    )]
    OperatorNormNotConverged { iterations: usize, estimate: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    EigenNotConverged {
        iterations: usize,
        best: Box<Spectrum>,
    },

    #[error("Jacobi sweeps did not reduce the off-diagonal norm below threshold (remaining {off_diagonal:e})")]
    JacobiNotConverged { off_diagonal: f64 },

    #[error("eigen reconstruction residual {residual:e} exceeds tolerance")]
    ReconstructionFailed { residual: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("unknown adversary strategy `{0}`")]
    UnknownStrategy(String),

    #[error("adversary `{strategy}` cannot run in the {phase} phase")]
    WrongPhase { strategy: String, phase: String },

    #[error("adversary needs {needed} entry changes but the budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("no spectral gap found among {available} eigenvalues (k_max {k_max})")]
    NoSpectralGap { available: usize, k_max: usize },

    #[error("pivot search failed for cluster {cluster} after {attempts} attempts")]
    PivotSearchFailed { cluster: usize, attempts: usize },

    #[error("reconstruction produced an empty cluster")]
    EmptyCluster,

    #[error("SDP solver did not converge in any restart")]
    SdpNotConverged { best: Box<SdpSolution> },

    #[error("zero-sum constraint violated: |X . 1| = {violation:e} > {limit:e}")]
    ConstraintViolated {
        violation: f64,
        limit: f64,
        best: Box<SdpSolution>,
    },

    #[error("SDP solution has no positive eigenvalue")]
    NoPositiveEigenvalue,

    #[error("degenerate order statistics: trimming {trim} of {len} coordinates")]
    DegenerateThreshold { trim: usize, len: usize },

    #[error("recursion failed: k'' = {k_double_prime} for a frame with k' = {k_prime}, |S| = {set_size}")]
    RecursionFailed {
        set_size: usize,
        k_prime: usize,
        k_double_prime: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code used in trial status columns.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::IndexOutOfBounds { .. } => "index_out_of_bounds",
            Error::NotSignMatrix { .. } => "not_sign_matrix",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::TooLarge { .. } => "too_large",
            Error::OperatorNormNotConverged { .. } => "opnorm_not_converged",
            Error::EigenNotConverged { .. } => "eigen_not_converged",
            Error::JacobiNotConverged { .. } => "jacobi_not_converged",
            Error::ReconstructionFailed { .. } => "reconstruction_failed",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::UnknownStrategy(_) => "unknown_strategy",
            Error::WrongPhase { .. } => "wrong_phase",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::NoSpectralGap { .. } => "no_spectral_gap",
            Error::PivotSearchFailed { .. } => "pivot_search_failed",
            Error::EmptyCluster => "empty_cluster",
            Error::SdpNotConverged { .. } => "sdp_not_converged",
            Error::ConstraintViolated { .. } => "constraint_violated",
            Error::NoPositiveEigenvalue => "no_positive_eigenvalue",
            Error::DegenerateThreshold { .. } => "degenerate_threshold",
            Error::RecursionFailed { .. } => "recursion_failed",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
