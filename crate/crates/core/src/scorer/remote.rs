//! Blocking HTTP client for a model server.
//!
//! `POST /score` with `{question, image_ref, candidate, condition, role}` answers
//! `{"logprob": x}` with `x <= 0`; `POST /sample` with
//! `{question, image_ref, temperature, max_tokens}` answers `{"text", "embedding"}`.
//! Connection failures, timeouts, 429 and 5xx are retried with doubling backoff.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::sampling::Sampler;
use crate::error::{Error, Result};
use crate::game::InitScores;
use crate::strategy::SignalLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generator,
    Verifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    pub initial_backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(30),
            retries: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }

    /// Sleep before retry `k` (0-based).
    pub fn backoff(&self, k: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(k)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    question: &'a str,
    image_ref: Option<&'a str>,
    candidate: &'a str,
    condition: &'a str,
    role: Role,
}

#[derive(Deserialize)]
struct ScoreResponse {
    logprob: f64,
}

#[derive(Serialize)]
struct SampleRequest<'a> {
    question: &'a str,
    image_ref: Option<&'a str>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct SampleResponse {
    text: String,
    embedding: Vec<f64>,
}

enum Failure {
    Transient(String),
    Timeout,
    Fatal(Error),
}

pub struct RemoteScorer {
    client: Client,
    cfg: RemoteConfig,
}

impl RemoteScorer {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        let client = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("http client: {e}")))?;
        Ok(Self { client, cfg })
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &B,
        context: (&str, &str),
    ) -> Result<R> {
        let (candidate, condition) = context;
        let protocol = |message: String| Error::Protocol {
            candidate: candidate.to_string(),
            condition: condition.to_string(),
            message,
        };
        let url = format!("{}{}", self.cfg.endpoint, path);
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                thread::sleep(self.cfg.backoff(attempt - 1));
            }
            let outcome = match self.client.post(&url).json(body).send() {
                Err(e) if e.is_timeout() => Failure::Timeout,
                Err(e) => Failure::Transient(e.to_string()),
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                        Failure::Transient(format!("HTTP {status}"))
                    } else if !status.is_success() {
                        Failure::Fatal(protocol(format!("HTTP {status}")))
                    } else {
                        match resp.bytes() {
                            Err(e) if e.is_timeout() => Failure::Timeout,
                            Err(e) => Failure::Transient(e.to_string()),
                            Ok(bytes) => {
                                return serde_json::from_slice(&bytes)
                                    .map_err(|e| protocol(format!("malformed response: {e}")));
                            }
                        }
                    }
                }
            };
            match outcome {
                Failure::Fatal(e) => return Err(e),
                Failure::Timeout => last = "timeout".into(),
                Failure::Transient(msg) => last = msg,
            }
        }
        if last == "timeout" {
            return Err(Error::Timeout {
                candidate: candidate.to_string(),
                condition: condition.to_string(),
            });
        }
        Err(Error::Server {
            candidate: candidate.to_string(),
            condition: condition.to_string(),
            message: format!("{last} after {} retries", self.cfg.retries),
        })
    }

    pub fn score_one(
        &self,
        question: &str,
        image_ref: Option<&str>,
        candidate: &str,
        condition: SignalLabel,
        role: Role,
    ) -> Result<f64> {
        let body = ScoreRequest {
            question,
            image_ref,
            candidate,
            condition: condition.as_str(),
            role,
        };
        let resp: ScoreResponse = self.post("/score", &body, (candidate, condition.as_str()))?;
        if !resp.logprob.is_finite() || resp.logprob > 0.0 {
            return Err(Error::Protocol {
                candidate: candidate.to_string(),
                condition: condition.as_str().to_string(),
                message: format!("logprob must be finite and <= 0, got {}", resp.logprob),
            });
        }
        Ok(resp.logprob)
    }

    /// Teacher-forced scores for every candidate, both roles and both conditions.
    pub fn remote_score(
        &self,
        question: &str,
        image_ref: Option<&str>,
        candidates: &[String],
    ) -> Result<InitScores> {
        let mut gen = Vec::with_capacity(candidates.len());
        let mut ver = Vec::with_capacity(candidates.len());
        for c in candidates {
            let mut g = [0.0; 2];
            let mut v = [0.0; 2];
            for s in SignalLabel::ALL {
                g[s.index()] = self.score_one(question, image_ref, c, s, Role::Generator)?;
                v[s.index()] = self.score_one(question, image_ref, c, s, Role::Verifier)?;
            }
            gen.push(g);
            ver.push(v);
        }
        InitScores::new(gen, ver)
    }

    pub fn sample(
        &self,
        question: &str,
        image_ref: Option<&str>,
        temperature: f64,
        max_tokens: u32,
    ) -> Result<(String, Vec<f64>)> {
        let body = SampleRequest {
            question,
            image_ref,
            temperature,
            max_tokens,
        };
        let resp: SampleResponse = self.post("/sample", &body, ("", "sample"))?;
        Ok((resp.text, resp.embedding))
    }

    /// A [`Sampler`] bound to one question.
    pub fn sampler<'a>(
        &'a self,
        question: &'a str,
        image_ref: Option<&'a str>,
        max_tokens: u32,
    ) -> impl Sampler + 'a {
        move |t: f64| self.sample(question, image_ref, t, max_tokens)
    }
}
