use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    Dimension {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("atom {index}: delay {delay} outside [-1, 0]")]
    DelayOutOfRange { index: usize, delay: f64 },

    #[error("atoms {first} and {second} share location {location}")]
    DuplicateAtom {
        first: usize,
        second: usize,
        location: f64,
    },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("kernel has point masses; only pure densities are allowed here")]
    AtomsPresent,

    #[error("rate mu = {mu} must exceed lambda = {lambda}")]
    RateBelowLambda { mu: f64, lambda: f64 },

    #[error("no certificate at this rate: gap ≤ 0 (gap = {gap})")]
    NoCertificate { gap: f64 },

    #[error("dominance not guaranteed for c = {0} <= 0; use generator_eigenvalues")]
    NonPositiveDelayCoefficient(f64),

    #[error("degenerate panel [{left}, {right}]")]
    DegeneratePanel { left: f64, right: f64 },

    #[error("at least {min} nodes per panel required, got {found}")]
    TooFewNodes { min: usize, found: usize },

    #[error("Lyapunov integral diverges: spectral abscissa {0} >= 0")]
    Unstable(f64),

    #[error("Q singular, inner product not equivalent (observability rank {rank} < {n})")]
    Unobservable { rank: usize, n: usize },

    #[error("weighted Gram matrix is not positive definite")]
    GramNotPositive,

    #[error("step {step} does not divide {what} = {value}")]
    StepMismatch {
        step: f64,
        what: &'static str,
        value: f64,
    },

    #[error("initial state has zero weighted norm")]
    ZeroInitialNorm,

    #[error("need at least {min} paths, got {found}")]
    InsufficientPaths { min: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solve failed: {0}")]
    Singular(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
