//! Generator and verifier mixed strategies.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Simplex, SIMPLEX_TOLERANCE};

/// The private signal observed by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalLabel {
    Correct,
    Incorrect,
}

impl SignalLabel {
    pub const ALL: [SignalLabel; 2] = [SignalLabel::Correct, SignalLabel::Incorrect];

    /// Column index in the n×2 score layouts.
    pub fn index(self) -> usize {
        match self {
            SignalLabel::Correct => 0,
            SignalLabel::Incorrect => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignalLabel::Correct => "correct",
            SignalLabel::Incorrect => "incorrect",
        }
    }
}

impl fmt::Display for SignalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `a_G(· | x, s)` for both signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorStrategy {
    correct: Simplex,
    incorrect: Simplex,
}

impl GeneratorStrategy {
    pub fn new(correct: Simplex, incorrect: Simplex) -> Result<Self> {
        if correct.len() != incorrect.len() {
            return Err(Error::DimensionMismatch {
                expected: correct.len(),
                found: incorrect.len(),
            });
        }
        Ok(Self { correct, incorrect })
    }

    pub fn get(&self, signal: SignalLabel) -> &Simplex {
        match signal {
            SignalLabel::Correct => &self.correct,
            SignalLabel::Incorrect => &self.incorrect,
        }
    }

    pub fn correct(&self) -> &Simplex {
        &self.correct
    }

    pub fn incorrect(&self) -> &Simplex {
        &self.incorrect
    }

    pub fn len(&self) -> usize {
        self.correct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correct.is_empty()
    }
}

/// `a_V(· | x, y_i)`: one binary distribution `[p_correct, p_incorrect]` per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct VerifierStrategy {
    rows: Vec<[f64; 2]>,
}

impl VerifierStrategy {
    pub fn new(rows: Vec<[f64; 2]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(index, [c, i])| {
                if !c.is_finite() || !i.is_finite() {
                    return Err(Error::NonFinite);
                }
                if c < 0.0 || i < 0.0 {
                    return Err(Error::NegativeWeight {
                        index,
                        value: c.min(i),
                    });
                }
                let sum = c + i;
                if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                    return Err(Error::NotNormalized { sum });
                }
                Ok([c / sum, i / sum])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// Builds a verifier from `p_correct` alone.
    pub fn from_correct(p_correct: &[f64]) -> Result<Self> {
        Self::new(p_correct.iter().map(|&p| [p, 1.0 - p]).collect())
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn prob(&self, candidate: usize, signal: SignalLabel) -> f64 {
        self.rows[candidate][signal.index()]
    }

    pub fn column(&self, signal: SignalLabel) -> Vec<f64> {
        self.rows.iter().map(|r| r[signal.index()]).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl TryFrom<Vec<[f64; 2]>> for VerifierStrategy {
    type Error = Error;

    fn try_from(rows: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<VerifierStrategy> for Vec<[f64; 2]> {
    fn from(v: VerifierStrategy) -> Self {
        v.rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_lengths_must_agree() {
        let err = GeneratorStrategy::new(Simplex::uniform(2), Simplex::uniform(3)).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn verifier_rows_validated() {
        assert!(VerifierStrategy::new(vec![[0.9, 0.1], [0.5, 0.5]]).is_ok());
        assert!(matches!(
            VerifierStrategy::new(vec![[0.9, 0.2]]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            VerifierStrategy::new(vec![[1.1, -0.1]]),
            Err(Error::NegativeWeight { .. })
        ));
        assert_eq!(VerifierStrategy::new(vec![]), Err(Error::Empty));
    }

    #[test]
    fn verifier_serde_roundtrip() {
        let v = VerifierStrategy::from_correct(&[0.25, 0.5]).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "[[0.25,0.75],[0.5,0.5]]");
        assert_eq!(serde_json::from_str::<VerifierStrategy>(&json).unwrap(), v);
    }
}
