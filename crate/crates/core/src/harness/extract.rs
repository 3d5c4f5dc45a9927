use std::sync::LazyLock;

use regex::Regex;

use super::dataset::{Question, QuestionKind};
use crate::metrics::UNPARSED;

const ANSWER_CUE: &str = "the answer is therefore";

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?P<sign>[-+\u{2212}])?
        (?P<mant>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+)
        (?:
            [eE](?P<exp>[-+]?\d+)
          | \s*(?:[x\u{00d7}*]|\\times)\s*10\s*\^\s*\{?\s*(?P<pow>[-+\u{2212}]?\d+)\s*\}?
        )?",
    )
    .expect("number pattern compiles")
});

/// All numbers in `text`, left to right. Thousands separators are
/// dropped; `e` notation and `x 10^n` forms are understood.
pub fn find_numbers(text: &str) -> Vec<f64> {
    let mut out = Vec::new();
    for c in NUMBER.captures_iter(text) {
        let whole = c.get(0).unwrap();
        // A sign glued to a preceding word (e.g. "H-2") is a hyphen.
        let sign_is_hyphen = c.name("sign").is_some()
            && text[..whole.start()].chars().next_back().is_some_and(char::is_alphanumeric);
        let mant: f64 = match c["mant"].replace(',', "").parse() {
            Ok(v) => v,
            Err(_) => continue,
        };
        let mut v = mant;
        if let Some(e) = c.name("exp").or(c.name("pow")) {
            let e: i32 = match e.as_str().replace('\u{2212}', "-").parse() {
                Ok(e) => e,
                Err(_) => continue,
            };
            v = format!("{mant}e{e}").parse().unwrap_or(f64::NAN);
        }
        if let Some(s) = c.name("sign") {
            if !sign_is_hyphen && s.as_str() != "+" {
                v = -v;
            }
        }
        if v.is_finite() {
            out.push(v);
        }
    }
    out
}

/// The sentence containing the last answer cue, starting at the cue.
fn cue_sentence(response: &str) -> Option<&str> {
    let lower = response.to_lowercase();
    // Lowercasing can change byte offsets outside ASCII; only trust an
    // index that lands on the cue in the original text as well.
    let start = lower.rfind(ANSWER_CUE)?;
    let tail = response.get(start..)?;
    if !tail.to_lowercase().starts_with(ANSWER_CUE) {
        return None;
    }
    let body = &tail[ANSWER_CUE.len()..];
    let bytes = body.as_bytes();
    let mut end = body.len();
    for (i, ch) in body.char_indices() {
        if ch == '\n' {
            end = i;
            break;
        }
        if matches!(ch, '.' | '!' | '?') {
            let next = bytes.get(i + 1).copied();
            if next.is_none_or(|b| b.is_ascii_whitespace()) {
                end = i;
                break;
            }
        }
    }
    Some(&tail[..ANSWER_CUE.len() + end])
}

fn format_number(v: f64) -> String {
    format!("{v}")
}

fn extract_numeric(response: &str) -> Option<String> {
    if let Some(s) = cue_sentence(response) {
        if let Some(v) = find_numbers(s).pop() {
            return Some(format_number(v));
        }
    }
    find_numbers(response).pop().map(format_number)
}

fn extract_choice(response: &str, q: &Question) -> Option<String> {
    let choices = q.choices.as_ref()?;
    let tokens = response.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty());
    for t in tokens {
        if choices.contains_key(t) {
            return Some(t.to_string());
        }
    }
    let resp = response.trim().to_lowercase();
    if let Some((label, _)) = choices.iter().find(|(_, text)| text.trim().to_lowercase() == resp) {
        return Some(label.clone());
    }
    choices
        .iter()
        .filter(|(_, text)| !text.trim().is_empty() && resp.contains(&text.trim().to_lowercase()))
        .max_by_key(|(_, text)| text.trim().len())
        .map(|(label, _)| label.clone())
}

fn strip_token(t: &str) -> &str {
    t.trim_matches(|c: char| matches!(c, ',' | ';' | ':' | '"' | '\'' | '`' | '*'))
        .trim_end_matches('.')
}

fn extract_molecule(response: &str) -> Option<String> {
    if let Some(start) = response.find("[ANSWER]") {
        let rest = &response[start + "[ANSWER]".len()..];
        if let Some(end) = rest.find("[/ANSWER]") {
            let inner = rest[..end].trim();
            if !inner.is_empty() {
                return Some(inner.to_string());
            }
        }
    }
    let mut best: Option<&str> = None;
    for t in response.split_whitespace().map(strip_token) {
        if !t.is_empty()
            && best.is_none_or(|b| t.len() > b.len())
            && chemrag_chem::is_valid_smiles(t)
        {
            best = Some(t);
        }
    }
    best.map(str::to_string)
}

/// Pulls the answer out of a raw model response, or returns `"unparsed"`.
pub fn extract_answer(response: &str, q: &Question) -> String {
    let got = match q.kind {
        QuestionKind::MultiChoice => extract_choice(response, q),
        QuestionKind::Numeric | QuestionKind::PropertyNumeric => extract_numeric(response),
        QuestionKind::OpenMolecule => extract_molecule(response),
        QuestionKind::OpenText => Some(response.trim().to_string()).filter(|s| !s.is_empty()),
    };
    got.unwrap_or_else(|| UNPARSED.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::DatasetId;

    fn q(kind: QuestionKind) -> Question {
        Question {
            id: "x".into(),
            dataset: DatasetId::MmluChem,
            task: "t".into(),
            kind,
            text: "?".into(),
            choices: (kind == QuestionKind::MultiChoice).then(|| {
                [("A", "sodium chloride"), ("B", "water"), ("C", "salt"), ("D", "argon")]
                    .into_iter()
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .collect()
            }),
            gold: "A".into(),
        }
    }

    #[test]
    fn numbers() {
        assert_eq!(find_numbers("1,234.5 and -3e-2 then 6.02 x 10^23"), vec![1234.5, -0.03, 6.02e23]);
        assert_eq!(find_numbers("H-2 costs $5"), vec![2.0, 5.0]);
        assert_eq!(find_numbers("1.6 \u{00d7} 10^{-19} C"), vec![1.6e-19]);
    }

    #[test]
    fn numeric_rules() {
        let n = q(QuestionKind::Numeric);
        assert_eq!(extract_answer("The answer is therefore 42.0", &n), "42");
        assert_eq!(
            extract_answer("Using 3 moles... The answer is therefore 12.5 kJ. Check: 7", &n),
            "12.5"
        );
        assert_eq!(extract_answer("maybe 3 or 4", &n), "4");
        assert_eq!(extract_answer("no idea", &n), UNPARSED);
    }

    #[test]
    fn choice_rules() {
        let m = q(QuestionKind::MultiChoice);
        assert_eq!(extract_answer("I think B is correct", &m), "B");
        assert_eq!(extract_answer("(C)", &m), "C");
        assert_eq!(extract_answer("water", &m), "B");
        assert_eq!(extract_answer("it is sodium chloride, i.e. salt", &m), "A");
        assert_eq!(extract_answer("no clue", &m), UNPARSED);
    }

    #[test]
    fn molecule_rules() {
        let g = q(QuestionKind::OpenMolecule);
        assert_eq!(extract_answer("[ANSWER]CCO[/ANSWER]", &g), "CCO");
        assert_eq!(extract_answer("[ANSWER] c1ccccc1 [/ANSWER] extra", &g), "c1ccccc1");
        assert_eq!(extract_answer("The molecule is CC(=O)O.", &g), "CC(=O)O");
        assert_eq!(extract_answer("nothing here", &g), UNPARSED);
        let t = q(QuestionKind::OpenText);
        assert_eq!(extract_answer("  A small molecule.  ", &t), "A small molecule.");
        assert_eq!(extract_answer("   ", &t), UNPARSED);
    }
}
