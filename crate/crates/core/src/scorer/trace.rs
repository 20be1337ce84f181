//! Recorded instances: samples, embeddings and teacher-forced scores on disk.
//!
//! A trace file is a UTF-8 JSON array of instance objects. Each instance
//! carries `"schema": "bdg-trace/1"`, and its score tables are keyed by
//! canonical answer text so the candidate set can be rebuilt deterministically.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::{build_candidate_set, canonicalize, CandidateSet};
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::InitScores;

pub const TRACE_SCHEMA: &str = "bdg-trace/1";

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSample {
    pub text: String,
    pub temperature: f64,
    pub embedding: Vec<f64>,
    /// Marks the single-pass decode used by the greedy baseline.
    #[serde(default, skip_serializing_if = "is_false")]
    pub greedy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelScores {
    pub correct: f64,
    pub incorrect: f64,
}

impl LabelScores {
    fn pair(self) -> [f64; 2] {
        [self.correct, self.incorrect]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceTrace {
    pub schema: String,
    pub instance_id: String,
    pub question: String,
    #[serde(default)]
    pub image_ref: Option<String>,
    pub samples: Vec<TraceSample>,
    pub generator_logprob: BTreeMap<String, LabelScores>,
    pub verifier_logprob: BTreeMap<String, LabelScores>,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_embedding: Option<Vec<f64>>,
}

impl InstanceTrace {
    fn schema_error(&self, path: impl Into<String>, message: impl Into<String>) -> Error {
        Error::Schema {
            instance_id: self.instance_id.clone(),
            path: path.into(),
            message: message.into(),
        }
    }

    /// Checks everything the game and harness rely on.
    pub fn validate(&self) -> Result<()> {
        if self.schema != TRACE_SCHEMA {
            return Err(self.schema_error(
                "schema",
                format!("expected {TRACE_SCHEMA:?}, found {:?}", self.schema),
            ));
        }
        if self.samples.is_empty() {
            return Err(self.schema_error("samples", "no samples"));
        }
        let dim = self.samples[0].embedding.len();
        for (i, s) in self.samples.iter().enumerate() {
            if s.embedding.len() != dim {
                return Err(Error::EmbeddingDimMismatch {
                    context: format!("instance {:?} samples[{i}]", self.instance_id),
                    expected: dim,
                    found: s.embedding.len(),
                });
            }
            if s.embedding.iter().any(|x| !x.is_finite()) {
                return Err(
                    self.schema_error(format!("samples[{i}].embedding"), "non-finite value")
                );
            }
            if !(s.temperature.is_finite() && s.temperature > 0.0) {
                return Err(self.schema_error(
                    format!("samples[{i}].temperature"),
                    format!("must be > 0, got {}", s.temperature),
                ));
            }
        }
        if self.samples.iter().filter(|s| s.greedy).count() > 1 {
            return Err(self.schema_error("samples", "more than one greedy sample"));
        }
        if let Some(gold) = &self.gold_embedding {
            if gold.len() != dim {
                return Err(Error::EmbeddingDimMismatch {
                    context: format!("instance {:?} gold_embedding", self.instance_id),
                    expected: dim,
                    found: gold.len(),
                });
            }
        }
        for (field, table) in [
            ("generator_logprob", &self.generator_logprob),
            ("verifier_logprob", &self.verifier_logprob),
        ] {
            for (text, scores) in table {
                for (label, lp) in [("correct", scores.correct), ("incorrect", scores.incorrect)] {
                    if !lp.is_finite() || lp > 0.0 {
                        return Err(self.schema_error(
                            format!("{field}.{text:?}.{label}"),
                            format!("log-probability must be finite and <= 0, got {lp}"),
                        ));
                    }
                }
            }
        }
        let mut canon: Vec<String> = self
            .samples
            .iter()
            .filter_map(|s| canonicalize(&s.text).ok())
            .collect();
        if canon.is_empty() {
            return Err(Error::NoValidCandidates);
        }
        canon.dedup();
        for text in &canon {
            for (field, table) in [
                ("generator_logprob", &self.generator_logprob),
                ("verifier_logprob", &self.verifier_logprob),
            ] {
                if !table.contains_key(text) {
                    return Err(self.schema_error(
                        format!("{field}.{text:?}"),
                        format!("missing scores for candidate {text:?}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn candidate_set(&self, cfg: &GameConfig) -> Result<CandidateSet> {
        build_candidate_set(
            self.samples
                .iter()
                .map(|s| (s.text.as_str(), s.embedding.as_slice())),
            cfg,
        )
    }

    /// Score matrices aligned with `set`.
    pub fn init_scores(&self, set: &CandidateSet) -> Result<InitScores> {
        let lookup =
            |field: &str, table: &BTreeMap<String, LabelScores>| -> Result<Vec<[f64; 2]>> {
                set.texts()
                    .map(|text| {
                        table.get(text).map(|s| s.pair()).ok_or_else(|| {
                            self.schema_error(
                                format!("{field}.{text:?}"),
                                format!("missing scores for candidate {text:?}"),
                            )
                        })
                    })
                    .collect()
            };
        InitScores::new(
            lookup("generator_logprob", &self.generator_logprob)?,
            lookup("verifier_logprob", &self.verifier_logprob)?,
        )
    }

    /// The designated greedy sample, else the first sample at the lowest temperature.
    pub fn greedy_sample(&self) -> &TraceSample {
        if let Some(s) = self.samples.iter().find(|s| s.greedy) {
            return s;
        }
        self.samples
            .iter()
            .reduce(|best, s| {
                if s.temperature < best.temperature {
                    s
                } else {
                    best
                }
            })
            .expect("validated traces have samples")
    }

    /// Embedding for the gold answer: the recorded one, else that of a sample with
    /// the same canonical text.
    pub fn gold_embedding(&self) -> Option<&[f64]> {
        if let Some(e) = &self.gold_embedding {
            return Some(e);
        }
        let gold = canonicalize(&self.gold_answer).ok()?;
        self.samples
            .iter()
            .find(|s| canonicalize(&s.text).is_ok_and(|c| c == gold))
            .map(|s| s.embedding.as_slice())
    }
}

/// Reads and validates a trace file.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<InstanceTrace>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<Vec<InstanceTrace>> {
    let raw: Vec<serde_json::Value> = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) if e.is_data() => {
            return Err(Error::Schema {
                instance_id: String::new(),
                path: "$".into(),
                message: format!("top level must be an array of instances: {e}"),
            })
        }
        Err(e) => return Err(Error::Parse(e.to_string())),
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, value)| {
            let instance_id = value
                .get("instance_id")
                .and_then(|v| v.as_str())
                .map_or_else(|| format!("#{i}"), str::to_string);
            let trace: InstanceTrace =
                serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
                    instance_id,
                    path: e.path().to_string(),
                    message: e.inner().to_string(),
                })?;
            trace.validate()?;
            Ok(trace)
        })
        .collect()
}

pub fn save_trace(path: impl AsRef<Path>, traces: &[InstanceTrace]) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(traces).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
