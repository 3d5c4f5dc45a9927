//! Retrieval tokenizer.
//!
//! Text is lowercased and split on non-alphanumeric characters. A raw
//! whitespace token that looks like a chemical identifier (SMILES
//! punctuation, digits next to letters, or several capitals as in `CCO`) is
//! also emitted unsplit with its case preserved.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let before = out.len();
        out.extend(
            raw.split(|c: char| !c.is_alphanumeric())
                .filter(|p| !p.is_empty())
                .map(str::to_lowercase),
        );
        let trimmed = trim_punctuation(raw);
        let single_same = out.len() == before + 1 && out[before] == trimmed;
        if !single_same && is_chemical_token(trimmed) {
            out.push(trimmed.to_string());
        }
    }
    out
}

fn trim_punctuation(raw: &str) -> &str {
    let mut t = raw.trim_end_matches(['.', ',', ';', ':', '!', '?', '"', '\'']);
    // SMILES never begin with '(' so a leading one is prose punctuation.
    t = t.trim_start_matches(['"', '\'', '(']);
    if t.matches(')').count() > t.matches('(').count() {
        t = t.strip_suffix(')').unwrap_or(t);
    }
    t
}

/// Heuristic for tokens that must survive tokenization intact.
pub fn is_chemical_token(t: &str) -> bool {
    if t.chars().count() < 2 || !t.chars().any(char::is_alphabetic) {
        return false;
    }
    if t.contains(['(', ')', '[', ']', '=', '#', '@', '+']) {
        return true;
    }
    let chars: Vec<char> = t.chars().collect();
    let digit_next_to_letter = chars.windows(2).any(|w| {
        (w[0].is_ascii_digit() && w[1].is_alphabetic())
            || (w[0].is_alphabetic() && w[1].is_ascii_digit())
    });
    digit_next_to_letter || chars.iter().filter(|c| c.is_ascii_uppercase()).count() >= 2
}
