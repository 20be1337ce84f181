use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty weight vector")]
    Empty,
    #[error("all weights are zero")]
    AllZero,
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("nothing left after canonicalizing {raw:?}")]
    EmptyAfterCanonicalization { raw: String },
    #[error("no sample produced a valid candidate")]
    NoValidCandidates,
    #[error("embedding {index} has zero norm")]
    ZeroNormEmbedding { index: usize },
    #[error("embedding dimension mismatch in {context}: expected {expected}, found {found}")]
    EmbeddingDimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid ground metric: {0}")]
    InvalidMetric(String),

    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),
    #[error("oracle supports at most 6 points, got {n}")]
    TooLarge { n: usize },
    #[error("marginal is not representable on a grid of {grid}")]
    NotGridRepresentable { grid: u32 },
    #[error("transportation simplex did not terminate after {pivots} pivots")]
    SolverStalled { pivots: usize },

    #[error("verifier column `{signal}` is identically zero")]
    ZeroColumn { signal: &'static str },
    #[error("invalid scores: {0}")]
    InvalidScores(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error in instance {instance_id:?} at {path}: {message}")]
    Schema {
        instance_id: String,
        path: String,
        message: String,
    },
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("timeout scoring {candidate:?} ({condition})")]
    Timeout {
        candidate: String,
        condition: String,
    },
    #[error("protocol error scoring {candidate:?} ({condition}): {message}")]
    Protocol {
        candidate: String,
        condition: String,
        message: String,
    },
    #[error("server error scoring {candidate:?} ({condition}): {message}")]
    Server {
        candidate: String,
        condition: String,
        message: String,
    },

    #[error("only {converged} of {total} instances converged in both modes (need {required:.0}%)")]
    InsufficientConvergence {
        converged: usize,
        total: usize,
        required: f64,
    },
}

impl Error {
    /// Input-shape problems: malformed files, schema violations, bad arguments.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Schema { .. }
                | Error::EmbeddingDimMismatch { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidMetric(_)
                | Error::DimensionMismatch { .. }
                | Error::InfeasibleMarginals(_)
                | Error::NotNormalized { .. }
                | Error::NegativeWeight { .. }
                | Error::InfeasibleGeometry(_)
        )
    }
}
