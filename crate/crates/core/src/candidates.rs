//! Candidate-set construction: answer canonicalization, surface deduplication,
//! and the cosine ground metric.
//!
//! Canonicalization lowercases the answer, cuts it at the first sentence
//! boundary, then repeatedly trims surrounding punctuation and strips one
//! leading filler phrase until nothing changes, and finally collapses
//! whitespace. The filler list is fixed by default so recorded fixtures stay
//! stable; extra phrases can be appended with [`Canonicalizer::with_extra_prefixes`].

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::error::{Error, Result};

/// Leading phrases removed from raw answers, matched case-insensitively on a word boundary.
pub const DEFAULT_FILLER_PREFIXES: &[&str] = &[
    "the answer is",
    "the image shows",
    "this is",
    "it is",
    "answer:",
    "a:",
    "the",
    "an",
    "a",
];

const UNICODE_PUNCT: &[char] = &[
    '\u{2018}', '\u{2019}', '\u{201c}', '\u{201d}', '\u{00ab}', '\u{00bb}', '\u{2026}', '\u{2013}',
    '\u{2014}', '\u{00bf}', '\u{00a1}',
];

fn is_strippable(c: char) -> bool {
    c.is_whitespace()
        || (c.is_ascii_punctuation() && !matches!(c, '%' | '+' | '#'))
        || UNICODE_PUNCT.contains(&c)
}

/// Answer-string canonicalizer with a configurable filler list.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonicalizer {
    // lowercase, longest first
    prefixes: Vec<String>,
}

impl Default for Canonicalizer {
    fn default() -> Self {
        Self::from_prefixes(DEFAULT_FILLER_PREFIXES.iter().map(|p| p.to_string()))
    }
}

impl Canonicalizer {
    fn from_prefixes(prefixes: impl IntoIterator<Item = String>) -> Self {
        let mut prefixes: Vec<String> = prefixes
            .into_iter()
            .map(|p| p.trim().to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        prefixes.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        prefixes.dedup();
        Self { prefixes }
    }

    pub fn with_extra_prefixes<S: AsRef<str>>(extra: &[S]) -> Self {
        Self::from_prefixes(
            DEFAULT_FILLER_PREFIXES
                .iter()
                .map(|p| p.to_string())
                .chain(extra.iter().map(|p| p.as_ref().to_string())),
        )
    }

    pub fn prefixes(&self) -> &[String] {
        &self.prefixes
    }

    pub fn canonicalize(&self, raw: &str) -> Result<String> {
        let lowered = raw.to_lowercase();
        let mut core = first_sentence(&lowered);
        loop {
            let trimmed = core.trim_matches(is_strippable);
            let stripped = self.strip_prefix(trimmed).unwrap_or(trimmed);
            if stripped.len() == core.len() {
                break;
            }
            core = stripped;
        }
        let out = core.split_whitespace().collect::<Vec<_>>().join(" ");
        if out.is_empty() {
            return Err(Error::EmptyAfterCanonicalization {
                raw: raw.to_string(),
            });
        }
        Ok(out)
    }

    fn strip_prefix<'a>(&self, text: &'a str) -> Option<&'a str> {
        self.prefixes.iter().find_map(|p| {
            let rest = text.strip_prefix(p.as_str())?;
            let boundary = p.ends_with(|c: char| !c.is_alphanumeric())
                || rest.chars().next().is_none_or(|c| !c.is_alphanumeric());
            boundary.then_some(rest)
        })
    }
}

/// Text before the first `.`, `!` or `?` that is followed by whitespace or the end
/// and has some alphanumeric content in front of it.
fn first_sentence(text: &str) -> &str {
    let mut seen_alnum = false;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_alphanumeric() {
            seen_alnum = true;
        } else if seen_alnum && matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|(_, next)| next.is_whitespace());
            if at_boundary {
                return &text[..i];
            }
        }
    }
    text
}

/// Canonicalizes with the default filler list.
pub fn canonicalize(raw: &str) -> Result<String> {
    Canonicalizer::default().canonicalize(raw)
}

/// One answer in the candidate set `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub raw_text: String,
    pub canonical_text: String,
    pub embedding: Vec<f64>,
}

/// Ordered, surface-deduplicated candidates sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new(candidates: Vec<Candidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::NoValidCandidates);
        }
        let dim = candidates[0].embedding.len();
        for (index, c) in candidates.iter().enumerate() {
            if c.canonical_text.is_empty() {
                return Err(Error::EmptyAfterCanonicalization {
                    raw: c.raw_text.clone(),
                });
            }
            if c.embedding.len() != dim {
                return Err(Error::EmbeddingDimMismatch {
                    context: format!("candidate {index}"),
                    expected: dim,
                    found: c.embedding.len(),
                });
            }
            if norm(&c.embedding) < ZERO_NORM {
                return Err(Error::ZeroNormEmbedding { index });
            }
            if candidates[..index]
                .iter()
                .any(|prev| prev.canonical_text == c.canonical_text)
            {
                return Err(Error::InvalidScores(format!(
                    "duplicate canonical text {:?}",
                    c.canonical_text
                )));
            }
        }
        Ok(Self { candidates })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn get(&self, index: usize) -> &Candidate {
        &self.candidates[index]
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.canonical_text.as_str())
    }

    pub fn position(&self, canonical_text: &str) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.canonical_text == canonical_text)
    }
}

const ZERO_NORM: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Builds `Y` from samples in arrival order, keeping at most `cfg.n_candidates`.
pub fn build_candidate_set<'a, I>(samples: I, cfg: &GameConfig) -> Result<CandidateSet>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    build_candidate_set_with(&Canonicalizer::default(), samples, cfg.n_candidates)
}

pub fn build_candidate_set_with<'a, I>(
    canonicalizer: &Canonicalizer,
    samples: I,
    max_candidates: usize,
) -> Result<CandidateSet>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let mut accepted: Vec<Candidate> = Vec::new();
    let mut dim = None;
    for (i, (raw, embedding)) in samples.into_iter().enumerate() {
        let expected = *dim.get_or_insert(embedding.len());
        if embedding.len() != expected {
            return Err(Error::EmbeddingDimMismatch {
                context: format!("sample {i}"),
                expected,
                found: embedding.len(),
            });
        }
        if accepted.len() >= max_candidates {
            continue;
        }
        let Ok(canonical_text) = canonicalizer.canonicalize(raw) else {
            continue;
        };
        if accepted.iter().any(|c| c.canonical_text == canonical_text) {
            continue;
        }
        if norm(embedding) < ZERO_NORM {
            return Err(Error::ZeroNormEmbedding {
                index: accepted.len(),
            });
        }
        accepted.push(Candidate {
            raw_text: raw.to_string(),
            canonical_text,
            embedding: embedding.to_vec(),
        });
    }
    if dim.is_none() {
        return Err(Error::NoValidCandidates);
    }
    CandidateSet::new(accepted)
}

/// Symmetric pairwise distance matrix with zero diagonal and entries in `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundMetric {
    n: usize,
    values: Vec<f64>,
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;

impl GroundMetric {
    /// Validates an explicit matrix. Diagonal entries within 1e-12 of zero are set to zero.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty matrix".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                let d = values[i * n + j];
                if !d.is_finite() || !(0.0..=2.0).contains(&d) {
                    return Err(Error::InvalidMetric(format!(
                        "D[{i}][{j}] = {d} outside [0, 2]"
                    )));
                }
                if (d - values[j * n + i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidMetric(format!("D[{i}][{j}] != D[{j}][{i}]")));
                }
            }
            if values[i * n + i] > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidMetric(format!("D[{i}][{i}] is not zero")));
            }
            values[i * n + i] = 0.0;
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Multiplies every entry by `factor`, which must keep entries within `[0, 2]`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_rows(
            self.values
                .chunks(self.n)
                .map(|row| row.iter().map(|d| d * factor).collect())
                .collect(),
        )
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM {
        return Err(Error::ZeroNormEmbedding { index: 0 });
    }
    if nb < ZERO_NORM {
        return Err(Error::ZeroNormEmbedding { index: 1 });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    Ok((dot / (sq(a) * sq(b)).sqrt()).clamp(-1.0, 1.0))
}

/// `D_ij = 1 - cos(e_i, e_j)`.
pub fn ground_metric(set: &CandidateSet) -> Result<GroundMetric> {
    embedding_metric(set.candidates().iter().map(|c| c.embedding.as_slice()))
}

pub(crate) fn embedding_metric<'a>(
    embeddings: impl IntoIterator<Item = &'a [f64]>,
) -> Result<GroundMetric> {
    let embeddings: Vec<&[f64]> = embeddings.into_iter().collect();
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::NoValidCandidates);
    }
    let dim = embeddings[0].len();
    let mut sq_norms = Vec::with_capacity(n);
    for (index, e) in embeddings.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::EmbeddingDimMismatch {
                context: format!("candidate {index}"),
                expected: dim,
                found: e.len(),
            });
        }
        let sq: f64 = e.iter().map(|x| x * x).sum();
        if sq.sqrt() < ZERO_NORM {
            return Err(Error::ZeroNormEmbedding { index });
        }
        sq_norms.push(sq);
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            // sqrt(a * a) == a in IEEE arithmetic, so identical vectors give exactly 1
            let dot: f64 = embeddings[i]
                .iter()
                .zip(embeddings[j])
                .map(|(x, y)| x * y)
                .sum();
            let cos = (dot / (sq_norms[i] * sq_norms[j]).sqrt()).clamp(-1.0, 1.0);
            let d = (1.0 - cos).clamp(0.0, 2.0);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(GroundMetric { n, values })
}
