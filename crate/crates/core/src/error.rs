use thiserror::Error;

/// Errors raised by assembly, factorisation and the eigensolvers.
#[derive(Debug, Error)]
pub enum AmlsError {
    #[error("invalid range: left endpoint {a} must be smaller than right endpoint {b}")]
    InvalidRange { a: f64, b: f64 },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("symmetric eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("singular leading block: {0}")]
    SingularBlock(String),

    #[error("degenerate partition: {n1} indices in the first subdomain, {n2} in the second")]
    DegeneratePartition { n1: usize, n2: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("orthonormalisation dropped every column")]
    EmptySubspace,

    #[error("singular value decomposition failed")]
    SvdFailure,

    #[error("H-matrix structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("recursion depth {0} exceeds the limit")]
    RecursionDepth(usize),

    #[error("report needs {needed} eigenvalues but only {available} are available")]
    IndexShortfall { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = AmlsError> = std::result::Result<T, E>;
