use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsrError>;

#[derive(Debug, Error)]
pub enum SsrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("duplicate sensor id {0}")]
    DuplicateSensor(usize),
    #[error("at least one sensor required")]
    NoSensors,
    #[error("unknown sensor id {0}")]
    UnknownSensor(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("invalid tolerances: {0}")]
    InvalidTolerance(String),
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("ill-separated spectrum: {0}")]
    IllSeparatedSpectrum(String),
    #[error("not a direct sum: {0}")]
    NotDirectSum(String),
    #[error("subspace not invariant under map (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("sensor cannot observe this substate")]
    NotObservable,
    #[error("vote failure: best support {support} < required {required}")]
    VoteFailure { support: usize, required: usize },
    #[error("need at least {need} estimates, got {got}")]
    TooFewEstimates { got: usize, need: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("search budget exhausted after {0} subsets")]
    BudgetExhausted(u64),
    #[error("missing substate estimates for eigenvalue blocks {0:?}")]
    MissingParts(Vec<usize>),
    #[error("no stealth attack exists at this budget (system is {0}-sparse observable)")]
    NoStealthAttack(i64),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
