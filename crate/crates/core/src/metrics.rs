//! Text and numeric scoring: sentence BLEU, ROUGE-L, normalized Levenshtein,
//! relative-tolerance numeric accuracy and multi-choice accuracy.
//!
//! Every score lives in `[0, 1]`; percent scaling happens only when reports
//! are printed.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smoothing floor for n-gram precisions with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const DEFAULT_REL_TOL: f64 = 0.05;
/// Label returned by answer extraction when nothing usable was found.
pub const UNPARSED: &str = "unparsed";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("non-finite value in numeric comparison (pred {pred}, gold {gold})")]
    NonFinite { pred: f64, gold: f64 },
}

/// A named score in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreValue {
    pub metric: String,
    pub value: f64,
}

impl ScoreValue {
    pub fn new(metric: impl Into<String>, value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "score out of range: {value}");
        ScoreValue {
            metric: metric.into(),
            value,
        }
    }

    pub fn flag(metric: impl Into<String>, hit: bool) -> Self {
        Self::new(metric, if hit { 1.0 } else { 0.0 })
    }

    pub fn percent(&self) -> f64 {
        self.value * 100.0
    }
}

/// Lowercased whitespace tokens, used for prose.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Character tokens, used for SMILES strings.
pub fn char_tokens(text: &str) -> Vec<char> {
    text.chars().collect()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU with clipped n-gram precisions, epsilon smoothing for
/// zero matches and the standard brevity penalty. Orders longer than the
/// candidate are left out of the geometric mean, so a short candidate equal
/// to its reference scores 1.
pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T], max_n: usize) -> f64 {
    if candidate.is_empty() || reference.is_empty() || max_n == 0 {
        return 0.0;
    }
    let orders = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let total = candidate.len() + 1 - n;
        let matched: usize = cand
            .iter()
            .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matched == 0 {
            BLEU_EPSILON
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * (log_sum / orders as f64).exp()
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 (beta = 1) over tokens.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Character edit distance (insert/delete/substitute, unit costs).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d(a, b) / max(|a|, |b|)`; two empty strings score 1.
pub fn levenshtein_sim(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Relative-error match; a zero gold falls back to an absolute 1e-9 check.
pub fn numeric_match(pred: f64, gold: f64, rel_tol: f64) -> Result<bool, MetricError> {
    if !pred.is_finite() || !gold.is_finite() {
        return Err(MetricError::NonFinite { pred, gold });
    }
    if gold == 0.0 {
        return Ok(pred.abs() <= 1e-9);
    }
    Ok((pred - gold).abs() <= rel_tol * gold.abs())
}

pub fn choice_accuracy(pred: &str, gold: &str) -> bool {
    pred != UNPARSED && pred == gold
}
