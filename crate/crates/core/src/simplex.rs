//! Probability vectors over a finite candidate set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A point of the probability simplex: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Simplex {
    weights: Vec<f64>,
}

impl Simplex {
    /// Validates `weights` as a distribution. Sums within [`SIMPLEX_TOLERANCE`] of one
    /// are re-normalized; anything further off is rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self::rescaled(weights, sum))
    }

    /// Point mass on `index`.
    pub fn point_mass(len: usize, index: usize) -> Self {
        assert!(index < len, "point mass index out of range");
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform simplex needs at least one entry");
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    fn rescaled(mut weights: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }
}

impl<'de> Deserialize<'de> for Simplex {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let weights = Vec::<f64>::deserialize(deserializer)?;
        Simplex::new(weights).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for Simplex {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

fn check_entries(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty);
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::NegativeWeight { index, value });
    }
    Ok(())
}

/// Scales non-negative `raw` weights to sum to one.
pub fn normalize(raw: &[f64]) -> Result<Simplex> {
    check_entries(raw)?;
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        return Err(Error::AllZero);
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(Simplex::rescaled(raw.to_vec(), sum))
}

/// Max-shifted softmax.
pub fn softmax_from_logits(logits: &[f64]) -> Result<Simplex> {
    if logits.is_empty() {
        return Err(Error::Empty);
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Simplex::rescaled(exps, sum))
}

/// Candidate indices sorted by weight, descending; ties go to the lower index.
pub fn preference_ordering(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap().weights(), &[0.5, 0.5]);
        assert_eq!(
            normalize(&[1.0, 0.0, 0.0]).unwrap().weights(),
            &[1.0, 0.0, 0.0]
        );
        assert_eq!(normalize(&[3.0, 1.0]).unwrap().weights(), &[0.75, 0.25]);
    }

    #[test]
    fn normalize_errors() {
        assert_eq!(normalize(&[0.0, 0.0]), Err(Error::AllZero));
        assert_eq!(normalize(&[1.0, f64::NAN]), Err(Error::NonFinite));
        assert_eq!(normalize(&[f64::INFINITY]), Err(Error::NonFinite));
        assert_eq!(normalize(&[]), Err(Error::Empty));
        assert!(matches!(
            normalize(&[1.0, -0.5]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
    }

    #[test]
    fn simplex_new_tolerance() {
        let s = Simplex::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(
            Simplex::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(
            softmax_from_logits(&[0.0, 0.0]).unwrap().weights(),
            &[0.5, 0.5]
        );
        assert_eq!(
            softmax_from_logits(&[1000.0, 1000.0]).unwrap().weights(),
            &[0.5, 0.5]
        );
        let s = softmax_from_logits(&[3f64.ln(), 1f64.ln()]).unwrap();
        assert!((s.weights()[0] - 0.75).abs() < 1e-15);
        assert!((s.weights()[1] - 0.25).abs() < 1e-15);
        assert_eq!(softmax_from_logits(&[0.0, f64::NAN]), Err(Error::NonFinite));
    }

    #[test]
    fn ordering_examples() {
        assert_eq!(preference_ordering(&[0.1, 0.7, 0.2]), vec![1, 2, 0]);
        assert_eq!(preference_ordering(&[0.5, 0.5]), vec![0, 1]);
        assert_eq!(preference_ordering(&[0.25; 4]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn deserialize_validates() {
        let s: Simplex = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(s.weights(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<Simplex>("[0.25, 0.25]").is_err());
    }

    fn raw_weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..10)
            .prop_filter("needs positive mass", |v| v.iter().any(|w| *w > 1e-6))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in raw_weights()) {
            let once = normalize(&raw).unwrap();
            let twice = normalize(once.weights()).unwrap();
            for (a, b) in once.weights().iter().zip(twice.weights()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
            prop_assert!((once.weights().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        }

        #[test]
        fn softmax_shift_invariant(
            logits in prop::collection::vec(-50.0f64..50.0, 1..10),
            shift in -500.0f64..500.0,
        ) {
            let a = softmax_from_logits(&logits).unwrap();
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            let b = softmax_from_logits(&shifted).unwrap();
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn ordering_is_permutation(raw in raw_weights()) {
            let mut order = preference_ordering(&raw);
            order.sort_unstable();
            prop_assert_eq!(order, (0..raw.len()).collect::<Vec<_>>());
        }

        #[test]
        fn ordering_invariant_under_monotone_maps(raw in raw_weights()) {
            let mapped: Vec<f64> = raw.iter().map(|w| (w * 3.0 + 1.0).ln()).collect();
            prop_assert_eq!(preference_ordering(&raw), preference_ordering(&mapped));
        }
    }
}
