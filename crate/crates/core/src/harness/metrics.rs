//! Answer-level metrics against the gold answer.

use std::collections::HashMap;

use crate::candidates::{canonicalize, cosine_similarity};
use crate::error::Result;

/// Canonical form, falling back to trimmed lowercase when canonicalization
/// strips everything (a gold answer may be pure filler such as "none").
fn canonical_or_plain(s: &str) -> String {
    canonicalize(s).unwrap_or_else(|_| s.trim().to_lowercase())
}

/// 1 iff the canonical forms are equal.
pub fn exact_match(pred: &str, gold: &str) -> f64 {
    if canonical_or_plain(pred) == canonical_or_plain(gold) {
        1.0
    } else {
        0.0
    }
}

/// Whitespace-token F1 over canonical forms, counting repeated tokens.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    let pred = canonical_or_plain(pred);
    let gold = canonical_or_plain(gold);
    let p: Vec<&str> = pred.split_whitespace().collect();
    let g: Vec<&str> = gold.split_whitespace().collect();
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Raw cosine in `[-1, 1]`; reports rescale it to `[0, 1]`.
pub fn semantic_similarity(pred: &[f64], gold: &[f64]) -> Result<f64> {
    cosine_similarity(pred, gold)
}

pub fn rescale_similarity(cos: f64) -> f64 {
    (cos + 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(token_f1("right upper lobe", "upper lobe"), 0.8);
        assert_eq!(token_f1("liver", "liver"), 1.0);
        assert_eq!(token_f1("liver", "spleen"), 0.0);
        assert_eq!(token_f1("the", "liver"), 0.0);
    }

    #[test]
    fn f1_counts_repeats_once_each() {
        // pred x x y, gold x y y: two tokens in common out of three each
        let f = token_f1("x x y", "x y y");
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_match_uses_canonical_forms() {
        assert_eq!(exact_match("The answer is: Liver.", "liver"), 1.0);
        assert_eq!(exact_match("Liver", "spleen"), 0.0);
        assert_eq!(exact_match("none", "None"), 1.0);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(semantic_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(semantic_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(
            semantic_similarity(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(),
            -1.0
        );
        assert!(matches!(
            semantic_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormEmbedding { .. })
        ));
        assert_eq!(rescale_similarity(-1.0), 0.0);
    }

    proptest! {
        #[test]
        fn f1_symmetric_and_bounded(
            a in prop::collection::vec("[a-d]{1,3}", 0..6),
            b in prop::collection::vec("[a-d]{1,3}", 0..6),
        ) {
            let (a, b) = (a.join(" "), b.join(" "));
            let ab = token_f1(&a, &b);
            prop_assert_eq!(ab, token_f1(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
