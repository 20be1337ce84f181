//! Synthetic near-synonym instances.
//!
//! Candidates are grouped into clusters whose embeddings sit at prescribed
//! cosine distances: unit vectors are read off the Cholesky factor of the Gram
//! matrix `G = 1 - D`. Scores favor the correct cluster with the same margin for
//! every member, then get independent Gaussian noise on the logit scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rng::{mix_seed, XorShift64Star};
use super::trace::{InstanceTrace, LabelScores, TraceSample, TRACE_SCHEMA};
use crate::error::{Error, Result};

const PSD_TOLERANCE: f64 = 1e-10;

fn default_margin() -> f64 {
    1.0
}

fn default_instances() -> usize {
    1
}

fn default_temperatures() -> Vec<f64> {
    vec![0.5, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub intra_cluster_distance: f64,
    pub inter_cluster_distance: f64,
    pub generator_noise: f64,
    pub verifier_noise: f64,
    pub correct_cluster: usize,
    pub seed: u64,
    /// Logit offset of correct-cluster members over the rest, generator side.
    #[serde(default = "default_margin")]
    pub generator_margin: f64,
    #[serde(default = "default_margin")]
    pub verifier_margin: f64,
    /// Suite size used by the harness; `synthesize_instance` ignores it.
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Sampling temperatures cycled across samples.
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
}

impl SyntheticSpec {
    pub fn total_candidates(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_clusters == 0 {
            return bad("n_clusters must be >= 1".into());
        }
        if self.cluster_sizes.len() != self.n_clusters {
            return bad(format!(
                "cluster_sizes has {} entries for {} clusters",
                self.cluster_sizes.len(),
                self.n_clusters
            ));
        }
        if self.cluster_sizes.contains(&0) {
            return bad("cluster sizes must be >= 1".into());
        }
        if self.correct_cluster >= self.n_clusters {
            return bad(format!(
                "correct_cluster {} out of range for {} clusters",
                self.correct_cluster, self.n_clusters
            ));
        }
        for (name, d) in [
            ("intra_cluster_distance", self.intra_cluster_distance),
            ("inter_cluster_distance", self.inter_cluster_distance),
        ] {
            if !(0.0..=2.0).contains(&d) {
                return bad(format!("{name} must lie in [0, 2], got {d}"));
            }
        }
        if self.intra_cluster_distance >= self.inter_cluster_distance {
            return bad("intra_cluster_distance must be below inter_cluster_distance".into());
        }
        for (name, x) in [
            ("generator_noise", self.generator_noise),
            ("verifier_noise", self.verifier_noise),
            ("generator_margin", self.generator_margin),
            ("verifier_margin", self.verifier_margin),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        if self.instances == 0 {
            return bad("instances must be >= 1".into());
        }
        if self.temperatures.is_empty()
            || self
                .temperatures
                .iter()
                .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return bad("temperatures must be non-empty and > 0".into());
        }
        Ok(())
    }

    /// The same spec with its seed replaced; used to derive suite members.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    fn cluster_of(&self) -> Vec<usize> {
        self.cluster_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
            .collect()
    }
}

/// Lower-triangular `L` with `L Lᵀ = G`, tolerating semidefinite `G`.
pub fn cholesky_psd(gram: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = gram.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = gram[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -PSD_TOLERANCE {
            return Err(Error::InfeasibleGeometry(format!(
                "Gram matrix is not positive semidefinite (pivot {j} = {d:.3e})"
            )));
        }
        if d <= PSD_TOLERANCE {
            // rank-deficient direction: the remaining column must vanish too
            for i in j + 1..n {
                let r = gram[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-8 {
                    return Err(Error::InfeasibleGeometry(format!(
                        "Gram matrix is not positive semidefinite (entry {i},{j})"
                    )));
                }
            }
            continue;
        }
        let pivot = d.sqrt();
        l[j][j] = pivot;
        for i in j + 1..n {
            let r = gram[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / pivot;
        }
    }
    Ok(l)
}

/// Unit embeddings whose cosine distances reproduce the cluster pattern.
pub fn cluster_embeddings(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    let clusters = spec.cluster_of();
    let n = clusters.len();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i == j, clusters[i] == clusters[j]) {
                    (true, _) => 1.0,
                    (false, true) => 1.0 - spec.intra_cluster_distance,
                    (false, false) => 1.0 - spec.inter_cluster_distance,
                })
                .collect()
        })
        .collect();
    cholesky_psd(&gram)
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn candidate_text(cluster: usize, member: usize) -> String {
    format!("concept {cluster} variant {member}")
}

/// Builds one instance; a pure function of `spec`.
pub fn synthesize_instance(spec: &SyntheticSpec) -> Result<InstanceTrace> {
    spec.validate()?;
    let embeddings = cluster_embeddings(spec)?;
    let clusters = spec.cluster_of();
    let mut rng = XorShift64Star::new(spec.seed);

    let mut samples = Vec::with_capacity(clusters.len());
    let mut generator_logprob = BTreeMap::new();
    let mut verifier_logprob = BTreeMap::new();
    let mut member = vec![0usize; spec.n_clusters];
    let mut best: Option<(f64, usize)> = None;
    for (i, &c) in clusters.iter().enumerate() {
        let text = candidate_text(c, member[c]);
        member[c] += 1;
        let sign = if c == spec.correct_cluster { 1.0 } else { -1.0 };

        let z_g = sign * spec.generator_margin;
        let g_correct = ln_sigmoid(z_g + spec.generator_noise * rng.next_normal());
        let g_incorrect = ln_sigmoid(-z_g + spec.generator_noise * rng.next_normal());
        let z_v = sign * spec.verifier_margin + spec.verifier_noise * rng.next_normal();
        // complementary pair, so the verifier's initial row is exactly (σ(z), 1 - σ(z))
        let v_correct = ln_sigmoid(z_v);
        let v_incorrect = ln_sigmoid(-z_v);

        if best.is_none_or(|(score, _)| g_correct > score) {
            best = Some((g_correct, i));
        }
        samples.push(TraceSample {
            text: text.clone(),
            temperature: spec.temperatures[i % spec.temperatures.len()],
            embedding: embeddings[i].clone(),
            greedy: false,
        });
        generator_logprob.insert(
            text.clone(),
            LabelScores {
                correct: g_correct,
                incorrect: g_incorrect,
            },
        );
        verifier_logprob.insert(
            text,
            LabelScores {
                correct: v_correct,
                incorrect: v_incorrect,
            },
        );
    }
    if let Some((_, i)) = best {
        samples[i].greedy = true;
    }
    let gold = clusters
        .iter()
        .position(|&c| c == spec.correct_cluster)
        .expect("validated spec has a non-empty correct cluster");

    Ok(InstanceTrace {
        schema: TRACE_SCHEMA.to_string(),
        instance_id: format!("synth-{:016x}", spec.seed),
        question: format!("synthetic question {:016x}", spec.seed),
        image_ref: None,
        gold_answer: samples[gold].text.clone(),
        gold_embedding: Some(embeddings[gold].clone()),
        samples,
        generator_logprob,
        verifier_logprob,
    })
}

/// `spec.instances` instances for one evaluation seed.
pub fn synthesize_suite(spec: &SyntheticSpec, run_seed: u64) -> Result<Vec<InstanceTrace>> {
    spec.validate()?;
    let base = mix_seed(spec.seed, run_seed);
    (0..spec.instances as u64)
        .map(|k| synthesize_instance(&spec.with_seed(mix_seed(base, k))))
        .collect()
}
