use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a Fock space needs at least one mode")]
    EmptyModes,
    #[error("mode label count {labels} does not match cutoff count {cutoffs}")]
    LabelMismatch { labels: usize, cutoffs: usize },
    #[error("Fock space dimension exceeds the configured maximum {max}")]
    Capacity { max: usize },
    #[error("mode index {mode} is out of range for a space with {modes} modes")]
    InvalidMode { mode: usize, modes: usize },
    #[error("cash and price modes must differ (both {0})")]
    ModeCollision(usize),
    #[error("space is missing the required mode {0}")]
    MissingMode(String),
    #[error("operators live on different Fock spaces")]
    SpaceMismatch,
    #[error("state {occupations:?} lies outside the space cutoffs {cutoffs:?}")]
    StateOutOfRange {
        occupations: Vec<usize>,
        cutoffs: Vec<usize>,
    },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("observable expectation has imaginary part {0:e}")]
    ComplexExpectation(f64),
    #[error("boundary margin violated: {0}")]
    MarginViolation(String),
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("time grid must be strictly increasing and start at or after zero")]
    InvalidTimeGrid,
    #[error("{0} requires the {1} form of the model")]
    UnsupportedModel(&'static str, &'static str),
    #[error("operator acts on reservoir mode {0}")]
    ReservoirMode(String),
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    QuadratureNonConvergence { a: f64, b: f64, estimate: f64 },
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
