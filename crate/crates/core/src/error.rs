use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible correlation {rho} for {k} attributes: {reason}")]
    InfeasibleCorrelation { rho: f64, k: usize, reason: String },

    #[error("covariance is numerically singular (condition number {condition:.3e})")]
    SingularCovariance { condition: f64 },

    #[error("mixing matrix is numerically singular (condition number {condition:.3e})")]
    SingularMixing { condition: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable subsets overlap on `{0}`")]
    OverlappingSubsets(String),

    #[error("interaction information takes 3 or 4 variables, got {0}")]
    ArityError(usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("no non-empty subset reaches correlation {rho_target}")]
    Infeasible { rho_target: f64 },

    #[error("bad IDX magic 0x{0:08x}")]
    BadMagic(u32),

    #[error("truncated IDX payload: header declares {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("IDX payload has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("empty digit pool for class {0}")]
    EmptyPool(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite gradient in `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at step {step}: {context}")]
    NonFiniteLoss { step: usize, context: String },

    #[error("subspace layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("degenerate latent: {0}")]
    DegenerateLatent(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
