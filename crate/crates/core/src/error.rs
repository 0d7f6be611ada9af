use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A_ij - conj(A_ji)| = {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hermitian eigen-solver did not converge (dim {dim}, max |entry| {max_entry:.3e}, Frobenius norm {frobenius:.3e})")]
    EigenNonConvergence {
        dim: usize,
        max_entry: f64,
        frobenius: f64,
    },

    #[error("function undefined at eigenvalue {eigenvalue} (value {value})")]
    SpectralDomain { eigenvalue: f64, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("budget exceeded: {what} needs {required}, limit is {limit}; {hint}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        limit: u128,
        hint: &'static str,
    },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("quadrature did not reach tolerance: estimate {estimate:.6e}, error {error:.3e}")]
    QuadratureFailed { estimate: f64, error: f64 },

    #[error("objective is not unimodal on [{lo}, {hi}]; scan table:\n{table}")]
    NotUnimodal { lo: f64, hi: f64, table: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
