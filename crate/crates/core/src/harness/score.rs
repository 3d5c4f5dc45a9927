use std::sync::LazyLock;

use chemrag_chem::{fingerprint, parse_smiles, tanimoto, FingerprintKind, KeySet};

use super::dataset::{Question, QuestionKind};
use crate::metrics::{
    bleu, char_tokens, choice_accuracy, levenshtein_sim, numeric_match, rouge_l, word_tokens, MetricError,
    ScoreValue, DEFAULT_REL_TOL, UNPARSED,
};

pub const BLEU_MAX_N: usize = 4;

static KEYS: LazyLock<KeySet> = LazyLock::new(KeySet::default_keys);

const CHOICE_METRICS: &[&str] = &["accuracy"];
const TEXT_METRICS: &[&str] = &["bleu_token", "rouge_l"];
const MOLECULE_METRICS: &[&str] = &[
    "exact_match",
    "validity",
    "maccs_fts",
    "rdk_fts",
    "morgan_fts",
    "bleu_char",
    "levenshtein",
];

/// Metric names produced for a question kind, in output order.
pub fn metrics_for(kind: QuestionKind) -> &'static [&'static str] {
    match kind {
        QuestionKind::MultiChoice | QuestionKind::Numeric | QuestionKind::PropertyNumeric => CHOICE_METRICS,
        QuestionKind::OpenText => TEXT_METRICS,
        QuestionKind::OpenMolecule => MOLECULE_METRICS,
    }
}

/// The metric a task contributes to its dataset composite.
pub fn primary_metric(kind: QuestionKind) -> &'static str {
    match kind {
        QuestionKind::MultiChoice | QuestionKind::Numeric | QuestionKind::PropertyNumeric => "accuracy",
        QuestionKind::OpenText => "rouge_l",
        QuestionKind::OpenMolecule => "exact_match",
    }
}

fn zeros(kind: QuestionKind) -> Vec<ScoreValue> {
    metrics_for(kind).iter().map(|m| ScoreValue::new(*m, 0.0)).collect()
}

fn molecule_scores(pred: &str, gold: &str) -> Vec<ScoreValue> {
    let p = parse_smiles(pred).ok();
    let g = parse_smiles(gold).ok();
    let fts = |kind| match (&p, &g) {
        (Some(p), Some(g)) => tanimoto(&fingerprint(p, kind, &KEYS), &fingerprint(g, kind, &KEYS)).unwrap_or(0.0),
        _ => 0.0,
    };
    vec![
        ScoreValue::flag("exact_match", chemrag_chem::exact_match(pred, gold)),
        ScoreValue::flag("validity", p.is_some()),
        ScoreValue::new("maccs_fts", fts(FingerprintKind::StructuralKeys)),
        ScoreValue::new("rdk_fts", fts(FingerprintKind::Path)),
        ScoreValue::new("morgan_fts", fts(FingerprintKind::Morgan)),
        ScoreValue::new("bleu_char", bleu(&char_tokens(pred), &char_tokens(gold), BLEU_MAX_N)),
        ScoreValue::new("levenshtein", levenshtein_sim(pred, gold)),
    ]
}

/// Scores an extracted answer against the gold answer. An unparsed
/// answer scores 0 on every metric.
pub fn score_item(q: &Question, extracted: &str) -> Result<Vec<ScoreValue>, MetricError> {
    if extracted == UNPARSED {
        return Ok(zeros(q.kind));
    }
    let gold = q.gold.trim();
    Ok(match q.kind {
        QuestionKind::MultiChoice => vec![ScoreValue::flag("accuracy", choice_accuracy(extracted, gold))],
        QuestionKind::Numeric | QuestionKind::PropertyNumeric => {
            let hit = match (extracted.trim().parse::<f64>(), gold.parse::<f64>()) {
                (Ok(p), Ok(g)) => numeric_match(p, g, DEFAULT_REL_TOL)?,
                _ => false,
            };
            vec![ScoreValue::flag("accuracy", hit)]
        }
        QuestionKind::OpenText => {
            let (c, r) = (word_tokens(extracted), word_tokens(gold));
            vec![
                ScoreValue::new("bleu_token", bleu(&c, &r, BLEU_MAX_N)),
                ScoreValue::new("rouge_l", rouge_l(&c, &r)),
            ]
        }
        QuestionKind::OpenMolecule => molecule_scores(extracted, gold),
    })
}
