//! The generator/verifier decoding game.
//!
//! Both agents start from softmax-normalized teacher-forced scores and then
//! follow a regularized no-regret schedule: each new strategy is a softmax of
//! half the opponent's normalized action plus `λ` times the agent's own
//! log-strategy, tempered by `1/(η t) + λ`. The two updates of one iteration
//! read only iteration-`t` strategies and are swapped in together.
//!
//! At every iteration the configured stopping rule is checked before updating.
//! `iterations_used` is the index `t` of the last state that was examined, so
//! an instance that is already converged reports 1 and the trace holds exactly
//! `iterations_used` records.

use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateSet, GroundMetric};
use crate::config::{AnswerRule, GameConfig, StoppingMode};
use crate::error::{Error, Result};
use crate::simplex::{argmax, normalize, preference_ordering, softmax_from_logits, Simplex};
use crate::strategy::{GeneratorStrategy, SignalLabel, VerifierStrategy};
use crate::transport::wasserstein1;

/// Probabilities below this are floored before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

fn floored_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Teacher-forced log-probabilities, one `[correct, incorrect]` pair per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitScores {
    generator_logprob: Vec<[f64; 2]>,
    verifier_logprob: Vec<[f64; 2]>,
}

impl InitScores {
    pub fn new(generator_logprob: Vec<[f64; 2]>, verifier_logprob: Vec<[f64; 2]>) -> Result<Self> {
        if generator_logprob.len() != verifier_logprob.len() {
            return Err(Error::DimensionMismatch {
                expected: generator_logprob.len(),
                found: verifier_logprob.len(),
            });
        }
        if generator_logprob.is_empty() {
            return Err(Error::Empty);
        }
        for (role, rows) in [
            ("generator", &generator_logprob),
            ("verifier", &verifier_logprob),
        ] {
            for (i, row) in rows.iter().enumerate() {
                for &lp in row {
                    if !lp.is_finite() {
                        return Err(Error::NonFinite);
                    }
                    if lp > 0.0 {
                        return Err(Error::InvalidScores(format!(
                            "{role} log-probability {lp} for candidate {i} is positive"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            generator_logprob,
            verifier_logprob,
        })
    }

    pub fn generator_logprob(&self) -> &[[f64; 2]] {
        &self.generator_logprob
    }

    pub fn verifier_logprob(&self) -> &[[f64; 2]] {
        &self.verifier_logprob
    }

    pub fn len(&self) -> usize {
        self.generator_logprob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generator_logprob.is_empty()
    }
}

/// Opponent action as seen by an update: column `s` is a distribution over candidates.
pub type OpponentView = Vec<[f64; 2]>;

/// Initial strategies: generator softmax over candidates per signal, verifier
/// softmax over the two labels per candidate.
pub fn initialize(scores: &InitScores) -> Result<(GeneratorStrategy, VerifierStrategy)> {
    let column = |s: SignalLabel| -> Vec<f64> {
        scores
            .generator_logprob
            .iter()
            .map(|r| r[s.index()])
            .collect()
    };
    let generator = GeneratorStrategy::new(
        softmax_from_logits(&column(SignalLabel::Correct))?,
        softmax_from_logits(&column(SignalLabel::Incorrect))?,
    )?;
    let rows = scores
        .verifier_logprob
        .iter()
        .map(|row| {
            let s = softmax_from_logits(row)?;
            Ok([s.weights()[0], s.weights()[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((generator, VerifierStrategy::new(rows)?))
}

/// `ã_G`: the generator's per-signal distributions, re-normalized against drift.
pub fn normalize_opponent_generator(g: &GeneratorStrategy) -> OpponentView {
    let renorm = |s: &Simplex| -> Vec<f64> {
        let sum: f64 = s.weights().iter().sum();
        s.weights().iter().map(|w| w / sum).collect()
    };
    let c = renorm(g.correct());
    let i = renorm(g.incorrect());
    c.into_iter().zip(i).map(|(a, b)| [a, b]).collect()
}

/// `ã_V`: each label column of the verifier normalized over candidates.
pub fn normalize_opponent_verifier(v: &VerifierStrategy) -> Result<OpponentView> {
    let mut cols = Vec::with_capacity(2);
    for s in SignalLabel::ALL {
        let col = normalize(&v.column(s)).map_err(|e| match e {
            Error::AllZero => Error::ZeroColumn { signal: s.as_str() },
            other => other,
        })?;
        cols.push(col.into_inner());
    }
    Ok(cols[0]
        .iter()
        .zip(&cols[1])
        .map(|(&a, &b)| [a, b])
        .collect())
}

fn check_opponent(view: &[[f64; 2]], n: usize) -> Result<()> {
    if view.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: view.len(),
        });
    }
    if view.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// One generator step at iteration `t ≥ 1`.
pub fn update_generator(
    g: &GeneratorStrategy,
    opponent: &[[f64; 2]],
    t: usize,
    cfg: &GameConfig,
) -> Result<GeneratorStrategy> {
    assert!(t >= 1, "iterations are 1-based");
    check_opponent(opponent, g.len())?;
    let denom = 1.0 / (cfg.eta_g * t as f64) + cfg.lambda_g;
    let step = |s: SignalLabel| -> Result<Simplex> {
        let logits: Vec<f64> = g
            .get(s)
            .weights()
            .iter()
            .zip(opponent)
            .map(|(&a, opp)| (0.5 * opp[s.index()] + cfg.lambda_g * floored_ln(a)) / denom)
            .collect();
        softmax_from_logits(&logits)
    };
    GeneratorStrategy::new(step(SignalLabel::Correct)?, step(SignalLabel::Incorrect)?)
}

/// One verifier step at iteration `t ≥ 1`.
pub fn update_verifier(
    v: &VerifierStrategy,
    opponent: &[[f64; 2]],
    t: usize,
    cfg: &GameConfig,
) -> Result<VerifierStrategy> {
    assert!(t >= 1, "iterations are 1-based");
    check_opponent(opponent, v.len())?;
    let denom = 1.0 / (cfg.eta_v * t as f64) + cfg.lambda_v;
    let rows = v
        .rows()
        .iter()
        .zip(opponent)
        .map(|(row, opp)| {
            let logits = [
                (0.5 * opp[0] + cfg.lambda_v * floored_ln(row[0])) / denom,
                (0.5 * opp[1] + cfg.lambda_v * floored_ln(row[1])) / denom,
            ];
            let s = softmax_from_logits(&logits)?;
            Ok([s.weights()[0], s.weights()[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    VerifierStrategy::new(rows)
}

/// `(min_i |a_G(i|c) - a_G(i|¬c)|, min_i |a_V(c|i) - a_V(¬c|i)|)`.
pub fn sigma_separation(g: &GeneratorStrategy, v: &VerifierStrategy) -> (f64, f64) {
    let sigma_g = g
        .correct()
        .weights()
        .iter()
        .zip(g.incorrect().weights())
        .map(|(a, b)| (a - b).abs())
        .fold(f64::INFINITY, f64::min);
    let sigma_v = v
        .rows()
        .iter()
        .map(|[c, i]| (c - i).abs())
        .fold(f64::INFINITY, f64::min);
    (sigma_g, sigma_v)
}

/// `p_V`: verifier correct-scores normalized over candidates.
pub fn verifier_correct_distribution(v: &VerifierStrategy) -> Result<Simplex> {
    normalize(&v.column(SignalLabel::Correct))
}

/// Snapshot of both strategies at iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub iteration: usize,
    pub generator: GeneratorStrategy,
    pub verifier: VerifierStrategy,
    pub sigma_g: f64,
    pub sigma_v: f64,
}

impl GameState {
    pub fn new(
        iteration: usize,
        generator: GeneratorStrategy,
        verifier: VerifierStrategy,
    ) -> Result<Self> {
        if generator.len() != verifier.len() {
            return Err(Error::DimensionMismatch {
                expected: generator.len(),
                found: verifier.len(),
            });
        }
        let (sigma_g, sigma_v) = sigma_separation(&generator, &verifier);
        Ok(Self {
            iteration,
            generator,
            verifier,
            sigma_g,
            sigma_v,
        })
    }

    pub fn p_g(&self) -> &Simplex {
        self.generator.correct()
    }

    /// `p_V`, or the raw correct column when every entry is zero.
    fn p_v_or_raw(&self) -> Vec<f64> {
        verifier_correct_distribution(&self.verifier)
            .map(Simplex::into_inner)
            .unwrap_or_else(|_| self.verifier.column(SignalLabel::Correct))
    }

    fn separated(&self, cfg: &GameConfig) -> bool {
        self.sigma_g > cfg.sigma_g() && self.sigma_v > cfg.sigma_v()
    }

    fn orders_match(&self) -> bool {
        preference_ordering(self.p_g().weights()) == preference_ordering(&self.p_v_or_raw())
    }

    /// Shared-utility telemetry: order agreement averaged over both signals.
    pub fn utility(&self) -> f64 {
        let mut agree = 0.0;
        let incorrect_col = self.verifier.column(SignalLabel::Incorrect);
        let incorrect = normalize(&incorrect_col)
            .map(Simplex::into_inner)
            .unwrap_or(incorrect_col);
        if self.orders_match() {
            agree += 1.0;
        }
        if preference_ordering(self.generator.incorrect().weights())
            == preference_ordering(&incorrect)
        {
            agree += 1.0;
        }
        0.5 * agree
    }
}

/// σ-separation on both sides and identical preference orderings of `p_G` and `p_V`.
pub fn check_stop_classic(state: &GameState, cfg: &GameConfig) -> bool {
    state.separated(cfg) && state.orders_match()
}

/// Outcome of the separation-weighted Wasserstein test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinCheck {
    pub stop: bool,
    pub w1: f64,
    pub w1_weighted: f64,
}

/// `W̃1 = W1(p_G, p_V; D) / (σ_V + ε)`; stops when `W̃1 < δ_W` and both agents are σ-separated.
pub fn check_stop_wasserstein(
    state: &GameState,
    metric: &GroundMetric,
    cfg: &GameConfig,
) -> Result<WassersteinCheck> {
    // inside a game an all-zero correct column is the degenerate-verifier case
    let p_v = verifier_correct_distribution(&state.verifier).map_err(|e| match e {
        Error::AllZero => Error::ZeroColumn {
            signal: SignalLabel::Correct.as_str(),
        },
        other => other,
    })?;
    let (w1, _) = wasserstein1(state.p_g(), &p_v, metric)?;
    let w1_weighted = w1 / (state.sigma_v + cfg.epsilon);
    Ok(WassersteinCheck {
        stop: w1_weighted < cfg.delta_w && state.separated(cfg),
        w1,
        w1_weighted,
    })
}

/// Why the game ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    OrderMatch,
    WassersteinConsensus,
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::OrderMatch => "order_match",
            Termination::WassersteinConsensus => "wasserstein_consensus",
            Termination::MaxIterations => "max_iterations",
        }
    }

    pub fn converged(self) -> bool {
        self != Termination::MaxIterations
    }
}

/// What was observed at one examined iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub p_g: Vec<f64>,
    pub p_v: Vec<f64>,
    pub sigma_g: f64,
    pub sigma_v: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w1_weighted: Option<f64>,
    pub order_match: bool,
    pub utility: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GameTrace {
    pub records: Vec<IterationRecord>,
}

impl GameTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub winner_index: usize,
    pub winner_text: String,
    pub iterations_used: usize,
    pub termination: Termination,
    pub trace: GameTrace,
}

/// Plays the game on `set` until the configured stopping rule fires or `T` states
/// have been examined.
pub fn run_game(
    scores: &InitScores,
    set: &CandidateSet,
    metric: &GroundMetric,
    cfg: &GameConfig,
) -> Result<GameResult> {
    cfg.validate()?;
    let n = set.len();
    for found in [scores.len(), metric.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    if n == 1 {
        return Ok(GameResult {
            winner_index: 0,
            winner_text: set.get(0).canonical_text.clone(),
            iterations_used: 0,
            termination: Termination::OrderMatch,
            trace: GameTrace::default(),
        });
    }

    let (mut generator, mut verifier) = initialize(scores)?;
    let mut trace = GameTrace::default();
    let mut termination = Termination::MaxIterations;
    for t in 1..=cfg.max_iterations {
        let state = GameState::new(t, generator, verifier)?;
        let order_match = state.orders_match();
        let (stop, w1, w1_weighted) = match cfg.stopping_mode {
            StoppingMode::Classic => (check_stop_classic(&state, cfg), None, None),
            StoppingMode::Wasserstein => {
                let check = check_stop_wasserstein(&state, metric, cfg)?;
                (check.stop, Some(check.w1), Some(check.w1_weighted))
            }
        };
        trace.records.push(IterationRecord {
            t,
            p_g: state.p_g().weights().to_vec(),
            p_v: state.p_v_or_raw(),
            sigma_g: state.sigma_g,
            sigma_v: state.sigma_v,
            w1,
            w1_weighted,
            order_match,
            utility: state.utility(),
        });
        GameState {
            generator,
            verifier,
            ..
        } = state;
        if stop {
            termination = match cfg.stopping_mode {
                StoppingMode::Classic => Termination::OrderMatch,
                StoppingMode::Wasserstein => Termination::WassersteinConsensus,
            };
            break;
        }
        if t == cfg.max_iterations {
            break;
        }
        let opp_v = normalize_opponent_verifier(&verifier)?;
        let opp_g = normalize_opponent_generator(&generator);
        let next_g = update_generator(&generator, &opp_v, t, cfg)?;
        let next_v = update_verifier(&verifier, &opp_g, t, cfg)?;
        generator = next_g;
        verifier = next_v;
    }

    let winner_index = select_winner(&generator, &verifier, cfg.answer_rule);
    Ok(GameResult {
        winner_index,
        winner_text: set.get(winner_index).canonical_text.clone(),
        iterations_used: trace.len(),
        termination,
        trace,
    })
}

fn select_winner(g: &GeneratorStrategy, v: &VerifierStrategy, rule: AnswerRule) -> usize {
    let p_g = g.correct().weights();
    let p_v = verifier_correct_distribution(v).map(Simplex::into_inner);
    match (rule, p_v) {
        (AnswerRule::GeneratorOnly, _) | (_, Err(_)) => argmax(p_g),
        (AnswerRule::VerifierOnly, Ok(p_v)) => argmax(&p_v),
        (AnswerRule::Average, Ok(p_v)) => {
            let avg: Vec<f64> = p_g.iter().zip(&p_v).map(|(a, b)| 0.5 * (a + b)).collect();
            argmax(&avg)
        }
    }
}
