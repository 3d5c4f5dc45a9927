use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::{Question, QuestionKind};
use super::HarnessError;
use crate::gateway::{ChatMessage, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Baseline,
    Rag,
}

impl FromStr for PromptMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(PromptMode::Baseline),
            "rag" => Ok(PromptMode::Rag),
            _ => Err(HarnessError::Config(format!("unknown prompt mode {s:?} (baseline or rag)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    OpenBaseline,
    MultiChoiceBaseline,
    NumericBaseline,
    GenerationBaseline,
    OpenRag,
    MultiChoiceRag,
    NumericRag,
    GenerationRag,
}

const INSTRUCTION: &str = "{Instruction}";
const CHOICES: &str = "{Choices}";
const REFERENCE: &str = "{reference}";

const OPEN_BASELINE: &str = "Answer the question directly.

Only give me the answer and do not output any other words.

Question: {Instruction}

Answer:";

const MULTI_CHOICE_BASELINE: &str = "Answer the question directly.

Only give me the answer and do not output any other words.

Question: {Instruction}

Choices: {Choices}

Make prediction from the given choices.

Answer:";

const NUMERIC_BASELINE: &str = "Answer the question directly.

Conclude the answer by stating \"The answer is therefore [ANSWER]\"

Only give me the answer and do not output any other words.

Question: {Instruction}

Answer:";

const GENERATION_BASELINE: &str = "Answer the question directly.

Your answer should be surrounded by [ANSWER] and [/ANSWER]. When generating a molecule, please generate a valid SMILES string.

Only give me the answer and do not output any other words.

Question: {Instruction}

Answer:";

const OPEN_RAG: &str = "Answer the question based on the given document.

Only give me the answer and do not output any other words.

The following are given documents.

{reference}

Question: {Instruction}

Answer:";

const MULTI_CHOICE_RAG: &str = "Answer the question based on the given document.

Only give me the answer and do not output any other words.

The following are given documents.

{reference}

Question: {Instruction}

Choices: {Choices}

Make prediction from the given choices.

Answer:";

const NUMERIC_RAG: &str = "Answer the question based on the given document.

Conclude the answer by stating \"The answer is therefore [ANSWER]\"

Only give me the answer and do not output any other words.

The following are given documents.

{reference}

Question: {Instruction}

Answer:";

const GENERATION_RAG: &str = "Answer the question based on the given document.

Your answer should be surrounded by [ANSWER] and [/ANSWER]. When generating a molecule, please generate a valid SMILES string.

The following are given documents.

{reference}

Only give me the answer and do not output any other words.

Question: {Instruction}

Answer:";

impl PromptKind {
    pub const ALL: [PromptKind; 8] = [
        PromptKind::OpenBaseline,
        PromptKind::MultiChoiceBaseline,
        PromptKind::NumericBaseline,
        PromptKind::GenerationBaseline,
        PromptKind::OpenRag,
        PromptKind::MultiChoiceRag,
        PromptKind::NumericRag,
        PromptKind::GenerationRag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::OpenBaseline => "open_baseline",
            PromptKind::MultiChoiceBaseline => "multi_choice_baseline",
            PromptKind::NumericBaseline => "numeric_baseline",
            PromptKind::GenerationBaseline => "generation_baseline",
            PromptKind::OpenRag => "open_rag",
            PromptKind::MultiChoiceRag => "multi_choice_rag",
            PromptKind::NumericRag => "numeric_rag",
            PromptKind::GenerationRag => "generation_rag",
        }
    }

    /// Template text with `{Instruction}`, `{Choices}` and `{reference}`
    /// placeholders.
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::OpenBaseline => OPEN_BASELINE,
            PromptKind::MultiChoiceBaseline => MULTI_CHOICE_BASELINE,
            PromptKind::NumericBaseline => NUMERIC_BASELINE,
            PromptKind::GenerationBaseline => GENERATION_BASELINE,
            PromptKind::OpenRag => OPEN_RAG,
            PromptKind::MultiChoiceRag => MULTI_CHOICE_RAG,
            PromptKind::NumericRag => NUMERIC_RAG,
            PromptKind::GenerationRag => GENERATION_RAG,
        }
    }

    pub fn mode(self) -> PromptMode {
        match self {
            PromptKind::OpenRag | PromptKind::MultiChoiceRag | PromptKind::NumericRag | PromptKind::GenerationRag => {
                PromptMode::Rag
            }
            _ => PromptMode::Baseline,
        }
    }

    pub fn has_choices(self) -> bool {
        matches!(self, PromptKind::MultiChoiceBaseline | PromptKind::MultiChoiceRag)
    }

    /// Template for a question kind. Free-text answers use the open
    /// template; molecules use the generation template.
    pub fn select(kind: QuestionKind, mode: PromptMode) -> PromptKind {
        use PromptKind::*;
        let rag = mode == PromptMode::Rag;
        match kind {
            QuestionKind::MultiChoice => if rag { MultiChoiceRag } else { MultiChoiceBaseline },
            QuestionKind::Numeric | QuestionKind::PropertyNumeric => if rag { NumericRag } else { NumericBaseline },
            QuestionKind::OpenMolecule => if rag { GenerationRag } else { GenerationBaseline },
            QuestionKind::OpenText => if rag { OpenRag } else { OpenBaseline },
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("no prompt template named {s:?}")))
    }
}

/// A retrieved passage as shown to the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub title: Option<String>,
    pub text: String,
}

/// `Document [i] (Title: t) text` blocks, rank 1 first.
pub fn render_reference(passages: &[Passage]) -> String {
    passages
        .iter()
        .enumerate()
        .map(|(i, p)| match p.title.as_deref().filter(|t| !t.is_empty()) {
            Some(t) => format!("Document [{}] (Title: {t}) {}", i + 1, p.text),
            None => format!("Document [{}] {}", i + 1, p.text),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// `A. text` lines in label order.
pub fn render_choices(q: &Question) -> String {
    q.choices
        .iter()
        .flatten()
        .map(|(label, text)| format!("{label}. {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn slot_values(kind: PromptKind, q: &Question, passages: &[Passage]) -> [(&'static str, String); 3] {
    [
        (INSTRUCTION, q.text.trim().to_string()),
        (CHOICES, render_choices(q)),
        (REFERENCE, render_reference(passages)),
    ]
    .map(|(name, v)| {
        let used = kind.template().contains(name);
        (name, if used { v } else { String::new() })
    })
}

/// Splits a template into literal text and placeholder names, in order.
fn skeleton(template: &str) -> Vec<Result<&str, &'static str>> {
    let mut parts = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        let next = [INSTRUCTION, CHOICES, REFERENCE]
            .into_iter()
            .filter_map(|p| rest.find(p).map(|i| (i, p)))
            .min();
        match next {
            Some((i, p)) => {
                if i > 0 {
                    parts.push(Ok(&rest[..i]));
                }
                parts.push(Err(p));
                rest = &rest[i + p.len()..];
            }
            None => {
                parts.push(Ok(rest));
                rest = "";
            }
        }
    }
    parts
}

/// Substitutes placeholders in one pass, so placeholder-like text inside
/// questions or passages is left alone.
pub fn render_text(kind: PromptKind, q: &Question, passages: &[Passage]) -> String {
    let values = slot_values(kind, q, passages);
    skeleton(kind.template())
        .into_iter()
        .map(|part| match part {
            Ok(lit) => lit.to_string(),
            Err(name) => values.iter().find(|(n, _)| *n == name).map(|(_, v)| v.clone()).unwrap_or_default(),
        })
        .collect()
}

/// The rendered prompt as a single user message.
pub fn render_prompt(kind: PromptKind, q: &Question, passages: &[Passage]) -> Result<Vec<ChatMessage>, HarnessError> {
    if kind.has_choices() != (q.kind == QuestionKind::MultiChoice) {
        return Err(HarnessError::Config(format!(
            "template {kind} does not fit a {} question",
            q.kind.as_str()
        )));
    }
    if kind.mode() == PromptMode::Baseline && !passages.is_empty() {
        return Err(HarnessError::Config(format!("baseline template {kind} takes no passages")));
    }
    Ok(vec![ChatMessage::new(Role::User, render_text(kind, q, passages))])
}

/// Checks a rendered prompt against its template: literal text must match
/// exactly and each slot must hold exactly the expected substitution. The
/// template itself must hold a single question and answer cue, so no
/// demonstrations can be present.
pub fn audit_prompt(kind: PromptKind, rendered: &str, q: &Question, passages: &[Passage]) -> Result<(), String> {
    let template = kind.template();
    for cue in ["Question: ", "Answer:"] {
        let n = template.matches(cue).count();
        if n != 1 {
            return Err(format!("template {kind} has {n} occurrences of {cue:?}"));
        }
    }
    let values = slot_values(kind, q, passages);
    let mut rest = rendered;
    for part in skeleton(template) {
        let expected = match part {
            Ok(lit) => lit,
            Err(name) => values.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_str()).unwrap_or(""),
        };
        rest = rest.strip_prefix(expected).ok_or_else(|| {
            let what = match part {
                Ok(_) => "template text".to_string(),
                Err(name) => format!("slot {name}"),
            };
            format!("{kind}: {what} differs at byte {}", rendered.len() - rest.len())
        })?;
    }
    if !rest.is_empty() {
        return Err(format!("{kind}: {} trailing bytes after the template", rest.len()));
    }
    Ok(())
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
            text: "What is {Choices}?".into(),
            choices: (kind == QuestionKind::MultiChoice)
                .then(|| [("A".to_string(), "one".to_string()), ("B".into(), "two".into())].into_iter().collect()),
            gold: if kind == QuestionKind::MultiChoice { "A".into() } else { "1".into() },
        }
    }

    #[test]
    fn markers_present() {
        assert!(PromptKind::NumericRag.template().contains("Conclude the answer by stating"));
        assert!(PromptKind::GenerationBaseline.template().contains("surrounded by [ANSWER] and [/ANSWER]"));
        assert!(PromptKind::MultiChoiceRag.template().contains("Make prediction from the given choices"));
    }

    #[test]
    fn render_and_audit() {
        let passages = vec![
            Passage { title: Some("Water".into()), text: "H2O is water.".into() },
            Passage { title: None, text: "Second.".into() },
        ];
        for kind in PromptKind::ALL {
            let qk = if kind.has_choices() { QuestionKind::MultiChoice } else { QuestionKind::Numeric };
            let question = q(qk);
            let p: &[Passage] = if kind.mode() == PromptMode::Rag { &passages } else { &[] };
            let msgs = render_prompt(kind, &question, p).unwrap();
            assert_eq!(msgs.len(), 1);
            let text = &msgs[0].content;
            assert!(text.contains("What is {Choices}?"));
            audit_prompt(kind, text, &question, p).unwrap();
            assert!(audit_prompt(kind, &text.replace("Answer:", "Answer: B"), &question, p).is_err());
        }
        let r = render_reference(&passages);
        assert_eq!(r, "Document [1] (Title: Water) H2O is water.\nDocument [2] Second.");
    }

    #[test]
    fn mismatched_template_rejected() {
        assert!(render_prompt(PromptKind::MultiChoiceRag, &q(QuestionKind::Numeric), &[]).is_err());
        assert!(render_prompt(
            PromptKind::NumericBaseline,
            &q(QuestionKind::Numeric),
            &[Passage { title: None, text: "x".into() }]
        )
        .is_err());
    }
}
