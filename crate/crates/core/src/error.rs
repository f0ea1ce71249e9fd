use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("Bloch vector has norm {norm}, expected 1")]
    NonUnitVector { norm: f64 },

    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("point (s, t) = ({s}, {t}) lies outside the quantum disc s² + t² ≤ 1")]
    OutsideQuantumDisc { s: f64, t: f64 },

    #[error("correlators reconstruct a negative probability ({value:.3e})")]
    NegativeProbability { value: f64 },

    #[error("operation requires binary outputs, got k_A = {k_a}, k_B = {k_b}")]
    NonBinary { k_a: usize, k_b: usize },

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("enumeration guard exceeded: {count} candidates > limit {limit}")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(
        "decomposition does not reproduce the observed correlation (max deviation {deviation:.3e})"
    )]
    InconsistentDecomposition { deviation: f64 },

    #[error("invalid attack model: {0}")]
    InvalidAttack(String),

    #[error(transparent)]
    Json(#[from] JsonError),
}

/// serde_json errors are not `Clone`/`PartialEq`; keep the message only.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("json: {0}")]
pub struct JsonError(pub String);

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(JsonError(e.to_string()))
    }
}
