use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("UE {ue} has an empty serving set")]
    EmptyServingSet { ue: usize },

    #[error("UE {ue} has zero achievable rate under its serving set")]
    ZeroRate { ue: usize },

    #[error("BS {bs} (cluster {bs_cluster}) cannot serve UE {ue} (cluster {ue_cluster})")]
    ClusterViolation {
        bs: usize,
        ue: usize,
        bs_cluster: u32,
        ue_cluster: u32,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("UE {ue} has zero demand volume")]
    ZeroDemand { ue: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("fixed-point iteration diverged after {iterations} iterations (max load {max_load:e})")]
    Diverged { iterations: usize, max_load: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("QoS vector is identically zero")]
    AllZero,

    #[error("association space too large: 2^{log2_size} exceeds 2^{limit}")]
    TooLarge { log2_size: usize, limit: usize },

    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
