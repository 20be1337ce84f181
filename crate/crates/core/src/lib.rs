//! Generator/verifier decoding game with a Wasserstein-1 semantic stopping rule.
//!
//! Given a finite set of candidate answers with embeddings and teacher-forced
//! log-probabilities, a generator and a verifier iterate regularized no-regret
//! updates until they reach a σ-separated consensus. Two stopping rules are
//! available: exact preference-order agreement, and a separation-weighted
//! Wasserstein-1 distance under the candidates' cosine ground metric, which
//! tolerates rank swaps between near-synonymous answers.

pub mod candidates;
pub mod config;
pub mod error;
pub mod game;
pub mod harness;
pub mod scorer;
pub mod simplex;
pub mod strategy;
pub mod transport;

pub use candidates::{
    build_candidate_set, canonicalize, ground_metric, Candidate, CandidateSet, Canonicalizer,
    GroundMetric,
};
pub use config::{AnswerRule, GameConfig, StoppingMode};
pub use error::{Error, Result};
pub use game::{run_game, GameResult, GameTrace, InitScores, Termination};
pub use harness::{
    compare_convergence, run_eval, ConvergenceReport, DecisionRule, EvalReport, Suite,
    DEFAULT_SEEDS,
};
pub use scorer::{load_trace, parse_trace, save_trace, InstanceTrace, SyntheticSpec};
pub use simplex::{normalize, preference_ordering, softmax_from_logits, Simplex};
pub use strategy::{GeneratorStrategy, SignalLabel, VerifierStrategy};
pub use transport::{wasserstein1, TransportPlan};
