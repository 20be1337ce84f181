//! Temperature-diverse candidate collection.

use std::collections::BTreeSet;

use super::trace::TraceSample;
use crate::candidates::Canonicalizer;
use crate::config::GameConfig;
use crate::error::Result;

/// Anything that can draw one answer with its embedding at a temperature.
pub trait Sampler {
    fn sample(&mut self, temperature: f64) -> Result<(String, Vec<f64>)>;
}

impl<F> Sampler for F
where
    F: FnMut(f64) -> Result<(String, Vec<f64>)>,
{
    fn sample(&mut self, temperature: f64) -> Result<(String, Vec<f64>)> {
        self(temperature)
    }
}

/// Draws samples, cycling through `cfg.temperatures`, until `cfg.n_candidates`
/// distinct canonical answers are seen or `cfg.max_sampling_calls` is spent.
/// Every draw is kept so the trace records the full sampling history.
pub fn collect_samples(sampler: &mut impl Sampler, cfg: &GameConfig) -> Result<Vec<TraceSample>> {
    cfg.validate()?;
    let canon = Canonicalizer::default();
    let mut seen = BTreeSet::new();
    let mut samples = Vec::new();
    for call in 0..cfg.max_sampling_calls {
        if seen.len() >= cfg.n_candidates {
            break;
        }
        let temperature = cfg.temperatures[call % cfg.temperatures.len()];
        let (text, embedding) = sampler.sample(temperature)?;
        if let Ok(c) = canon.canonicalize(&text) {
            seen.insert(c);
        }
        samples.push(TraceSample {
            text,
            temperature,
            embedding,
            greedy: false,
        });
    }
    Ok(samples)
}
