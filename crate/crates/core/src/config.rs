//! Game hyperparameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which convergence test ends the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoppingMode {
    /// σ-separation plus exact preference-order agreement.
    Classic,
    /// σ-separation plus separation-weighted W1 below `delta_w`.
    Wasserstein,
}

impl FromStr for StoppingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classic" => Ok(StoppingMode::Classic),
            "wasserstein" | "w" => Ok(StoppingMode::Wasserstein),
            other => Err(Error::InvalidConfig(format!(
                "unknown stopping mode {other:?}"
            ))),
        }
    }
}

impl fmt::Display for StoppingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoppingMode::Classic => "classic",
            StoppingMode::Wasserstein => "wasserstein",
        })
    }
}

/// How the winning candidate is read off the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerRule {
    /// argmax of `(p_G + p_V) / 2`.
    #[default]
    Average,
    GeneratorOnly,
    VerifierOnly,
}

/// All game and sampling hyperparameters.
///
/// A single `sigma` serves as both the generator and the verifier separation
/// threshold; read it through [`GameConfig::sigma_g`] and [`GameConfig::sigma_v`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub lambda_g: f64,
    pub lambda_v: f64,
    pub eta_g: f64,
    pub eta_v: f64,
    pub sigma: f64,
    pub delta_w: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub n_candidates: usize,
    pub max_sampling_calls: usize,
    pub temperatures: Vec<f64>,
    pub stopping_mode: StoppingMode,
    pub answer_rule: AnswerRule,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            lambda_g: 0.4,
            lambda_v: 0.4,
            eta_g: 0.4,
            eta_v: 0.4,
            sigma: 0.005,
            delta_w: 0.2,
            epsilon: 1e-8,
            max_iterations: 500,
            n_candidates: 8,
            max_sampling_calls: 16,
            temperatures: vec![0.5, 1.0],
            stopping_mode: StoppingMode::Wasserstein,
            answer_rule: AnswerRule::Average,
        }
    }
}

impl GameConfig {
    pub fn sigma_g(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_v(&self) -> f64 {
        self.sigma
    }

    pub fn with_stopping(mut self, mode: StoppingMode) -> Self {
        self.stopping_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("lambda_g", self.lambda_g),
            ("lambda_v", self.lambda_v),
            ("eta_g", self.eta_g),
            ("eta_v", self.eta_v),
            ("sigma", self.sigma),
            ("delta_w", self.delta_w),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in reals {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::InvalidConfig("n_candidates must be >= 1".into()));
        }
        if self.n_candidates > self.max_sampling_calls {
            return Err(Error::InvalidConfig(format!(
                "n_candidates ({}) exceeds max_sampling_calls ({})",
                self.n_candidates, self.max_sampling_calls
            )));
        }
        if self.temperatures.is_empty() {
            return Err(Error::InvalidConfig(
                "temperatures must not be empty".into(),
            ));
        }
        if let Some(t) = self
            .temperatures
            .iter()
            .find(|t| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::InvalidConfig(format!("temperature {t} must be > 0")));
        }
        Ok(())
    }
}
