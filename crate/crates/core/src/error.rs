use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("non-admissible potential: {0}")]
    NonAdmissiblePotential(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("λ = {lambda} outside the admissible range ]0, λ*[ with λ* = {lambda_star}")]
    LambdaOutOfRange { lambda: f64, lambda_star: f64 },
    #[error("no negative-energy endpoint after {doublings} doublings")]
    EndpointNotFound { doublings: usize },
    #[error("mountain-pass peak collapsed to zero after {iterations} iterations")]
    CollapsedToZero { iterations: usize },
    #[error("no (crossing, rebound) bracket for the initial height in [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("forced problem has no positive solution at zero amplitude")]
    NoPositiveSolutionAtZero,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
