//! Batch evaluation: decision rules, answer metrics, reports and the
//! stopping-criterion comparison.

mod convergence;
mod eval;
pub mod metrics;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::candidates::{canonicalize, ground_metric};
use crate::config::{GameConfig, StoppingMode};
use crate::error::{Error, Result};
use crate::game::{initialize, run_game, GameResult, Termination};
use crate::scorer::rng::{mix_seed, XorShift64Star};
use crate::scorer::{synthesize_suite, InstanceTrace, SyntheticSpec};
use crate::simplex::argmax;

pub use convergence::{
    compare_convergence, ConvergencePair, ConvergenceReport, CONVERGENCE_SCHEMA,
};
pub use eval::{run_eval, EvalReport, EvalRow, RuleAggregate, REPORT_SCHEMA};
pub use metrics::{exact_match, semantic_similarity, token_f1};
pub use stats::{wilcoxon_signed_rank, MeanStd, Wilcoxon, WilcoxonMethod};

/// Seeds used when none are given.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionRule {
    #[serde(rename = "greedy")]
    Greedy,
    /// Contrast of generator scores under the correct and incorrect prompts.
    #[serde(rename = "scd")]
    Scd,
    #[serde(rename = "verifier")]
    VerifierOnly,
    #[serde(rename = "bdg-classic")]
    BdgClassic,
    #[serde(rename = "bdg-w")]
    BdgWasserstein,
}

impl DecisionRule {
    pub const ALL: [DecisionRule; 5] = [
        DecisionRule::Greedy,
        DecisionRule::Scd,
        DecisionRule::VerifierOnly,
        DecisionRule::BdgClassic,
        DecisionRule::BdgWasserstein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionRule::Greedy => "greedy",
            DecisionRule::Scd => "scd",
            DecisionRule::VerifierOnly => "verifier",
            DecisionRule::BdgClassic => "bdg-classic",
            DecisionRule::BdgWasserstein => "bdg-w",
        }
    }

    pub fn stopping_mode(self) -> Option<StoppingMode> {
        match self {
            DecisionRule::BdgClassic => Some(StoppingMode::Classic),
            DecisionRule::BdgWasserstein => Some(StoppingMode::Wasserstein),
            _ => None,
        }
    }

    /// Parses a comma-separated list; `all` expands to every rule.
    pub fn parse_list(s: &str) -> Result<Vec<DecisionRule>> {
        let mut rules = Vec::new();
        for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if token.eq_ignore_ascii_case("all") {
                rules.extend(DecisionRule::ALL);
            } else {
                rules.push(token.parse()?);
            }
        }
        rules.sort();
        rules.dedup();
        if rules.is_empty() {
            return Err(Error::InvalidConfig("empty rule list".into()));
        }
        Ok(rules)
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "greedy" => Ok(DecisionRule::Greedy),
            "scd" => Ok(DecisionRule::Scd),
            "verifier" | "verifier-only" => Ok(DecisionRule::VerifierOnly),
            "bdg-classic" | "classic" => Ok(DecisionRule::BdgClassic),
            "bdg-w" | "bdg-wasserstein" | "wasserstein" => Ok(DecisionRule::BdgWasserstein),
            _ => Err(Error::InvalidConfig(format!("unknown rule {s:?}"))),
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rule's answer for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub answer: String,
    pub embedding: Vec<f64>,
    pub iterations: Option<usize>,
    pub termination: Option<Termination>,
}

pub fn decide(rule: DecisionRule, trace: &InstanceTrace, cfg: &GameConfig) -> Result<Decision> {
    if rule == DecisionRule::Greedy {
        let sample = trace.greedy_sample();
        return Ok(Decision {
            answer: canonicalize(&sample.text).unwrap_or_else(|_| sample.text.trim().to_string()),
            embedding: sample.embedding.clone(),
            iterations: None,
            termination: None,
        });
    }
    let set = trace.candidate_set(cfg)?;
    let scores = trace.init_scores(&set)?;
    let (index, iterations, termination) = match rule {
        DecisionRule::Scd => {
            let contrast: Vec<f64> = scores
                .generator_logprob()
                .iter()
                .map(|[c, i]| c - i)
                .collect();
            (argmax(&contrast), None, None)
        }
        DecisionRule::VerifierOnly => {
            let (_, verifier) = initialize(&scores)?;
            (
                argmax(&verifier.column(crate::strategy::SignalLabel::Correct)),
                None,
                None,
            )
        }
        DecisionRule::BdgClassic | DecisionRule::BdgWasserstein => {
            let mode = rule.stopping_mode().expect("game rule");
            let metric = ground_metric(&set)?;
            let GameResult {
                winner_index,
                iterations_used,
                termination,
                ..
            } = run_game(&scores, &set, &metric, &cfg.clone().with_stopping(mode))?;
            (winner_index, Some(iterations_used), Some(termination))
        }
        DecisionRule::Greedy => unreachable!(),
    };
    let candidate = set.get(index);
    Ok(Decision {
        answer: candidate.canonical_text.clone(),
        embedding: candidate.embedding.clone(),
        iterations,
        termination,
    })
}

/// Where evaluation instances come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Suite {
    Traces(Vec<InstanceTrace>),
    Synthetic(SyntheticSpec),
}

impl Suite {
    pub fn validate(&self, cfg: &GameConfig) -> Result<()> {
        match self {
            Suite::Traces(traces) if traces.is_empty() => {
                Err(Error::InvalidConfig("trace file holds no instances".into()))
            }
            Suite::Traces(_) => Ok(()),
            Suite::Synthetic(spec) => {
                spec.validate()?;
                if spec.total_candidates() > cfg.n_candidates {
                    return Err(Error::InvalidConfig(format!(
                        "synthetic spec has {} candidates, n_candidates is {}",
                        spec.total_candidates(),
                        cfg.n_candidates
                    )));
                }
                Ok(())
            }
        }
    }

    /// Instances for one seed. Synthetic suites are regenerated; recorded traces
    /// get their sample order shuffled.
    pub fn instances(&self, seed: u64) -> Result<Vec<InstanceTrace>> {
        match self {
            Suite::Synthetic(spec) => synthesize_suite(spec, seed),
            Suite::Traces(traces) => Ok(traces
                .iter()
                .enumerate()
                .map(|(k, trace)| {
                    let mut trace = trace.clone();
                    let mut rng = XorShift64Star::new(mix_seed(seed, k as u64));
                    for i in (1..trace.samples.len()).rev() {
                        let j = rng.below(i + 1);
                        trace.samples.swap(i, j);
                    }
                    trace
                })
                .collect()),
        }
    }
}

pub(crate) fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seed list is empty".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig(format!("duplicate seed {}", w[0])));
    }
    Ok(())
}

/// Runs `f` on a dedicated pool; `workers == 0` means one thread per logical CPU.
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
