use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid functions live on different domains")]
    DomainMismatch,

    #[error("length {got} does not match cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("eigen-decomposition failed: {0}")]
    Decomposition(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("hermite degree {0} exceeds the overflow guard of 200")]
    DegreeTooLarge(usize),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("side length {0} is not a positive multiple of the grid step within the box")]
    MisalignedSide(f64),

    #[error("projection range of dimension {dimension} exceeds half of the {cells} cells")]
    UnderResolved { dimension: usize, cells: usize },

    #[error("growth fit needs at least 4 finite constants, got {0}")]
    TooFewPoints(usize),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("certificate arithmetic produced beta = exp({ln_beta}), outside (0, 1)")]
    BetaOutOfRange { ln_beta: f64 },

    #[error("tau = {tau} outside (0, tau0 = {tau0})")]
    TauOutOfRange { tau: f64, tau0: f64 },

    #[error("spectral hypothesis unverifiable: {0}")]
    HypothesisUnverifiable(String),

    #[error("no unstable modes: the operator is already stable, skip feedback")]
    AlreadyStable,

    #[error("gram matrix numerically singular (condition number {condition:e})")]
    SingularGram {
        condition: f64,
        /// Coefficients of the eigenvector of the smallest Gram eigenvalue.
        offending: Vec<f64>,
    },

    #[error("no N in the sweep gives a positive decay rate")]
    NoDecayRate,

    #[error("instability detected at t = {time}: norm {norm} exceeds 10x the initial norm {initial}")]
    Instability { time: f64, norm: f64, initial: f64 },

    #[error("probe support exceeds the box: {0}")]
    ProbeOverflow(String),

    #[error("kernel has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
