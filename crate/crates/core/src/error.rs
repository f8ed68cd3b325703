use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("truncation dim {dim} too small for requested initial state; need at least {required}")]
    TruncationTooSmall { dim: usize, required: usize },

    #[error(
        "tail mass {tail_mass:.3e} exceeds tolerance {tail_tol:.3e} at step {step:?} (dim {dim})"
    )]
    TailExceeded {
        step: Option<usize>,
        tail_mass: f64,
        tail_tol: f64,
        dim: usize,
    },

    #[error("truncation ceiling {ceiling} reached (needed {needed})")]
    CeilingReached { ceiling: usize, needed: usize },

    #[error("non-finite displacement matrix element at (n={n}, m={m})")]
    NonFinite { n: usize, m: usize },

    #[error("oracle domain violation: {0}")]
    OracleDomain(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the propagation step to a tail violation.
    pub fn at_step(self, t: usize) -> Self {
        match self {
            Error::TailExceeded {
                tail_mass,
                tail_tol,
                dim,
                ..
            } => Error::TailExceeded {
                step: Some(t),
                tail_mass,
                tail_tol,
                dim,
            },
            other => other,
        }
    }
}
