use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    MmluChem,
    ScibenchChem,
    Chembench4k,
    MolInstructions,
}

impl DatasetId {
    pub const ALL: [DatasetId; 4] = [
        DatasetId::MmluChem,
        DatasetId::ScibenchChem,
        DatasetId::Chembench4k,
        DatasetId::MolInstructions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::MmluChem => "mmlu_chem",
            DatasetId::ScibenchChem => "scibench_chem",
            DatasetId::Chembench4k => "chembench4k",
            DatasetId::MolInstructions => "mol_instructions",
        }
    }

    /// Questions in the full benchmark release.
    pub fn expected_count(self) -> usize {
        match self {
            DatasetId::MmluChem => 303,
            DatasetId::ScibenchChem => 229,
            DatasetId::Chembench4k => 800,
            DatasetId::MolInstructions => 600,
        }
    }

    /// (number of sub-tasks, questions per sub-task) for datasets split
    /// into equal sub-tasks.
    pub fn task_layout(self) -> Option<(usize, usize)> {
        match self {
            DatasetId::Chembench4k => Some((8, 100)),
            DatasetId::MolInstructions => Some((6, 100)),
            _ => None,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown dataset {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultiChoice,
    Numeric,
    OpenText,
    OpenMolecule,
    PropertyNumeric,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::MultiChoice => "multi_choice",
            QuestionKind::Numeric => "numeric",
            QuestionKind::OpenText => "open_text",
            QuestionKind::OpenMolecule => "open_molecule",
            QuestionKind::PropertyNumeric => "property_numeric",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, QuestionKind::Numeric | QuestionKind::PropertyNumeric)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub dataset: DatasetId,
    pub task: String,
    pub kind: QuestionKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<IndexMap<String, String>>,
    pub gold: String,
}

impl Question {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        if self.task.trim().is_empty() {
            return Err("task is empty".into());
        }
        match self.kind {
            QuestionKind::MultiChoice => {
                let choices = self
                    .choices
                    .as_ref()
                    .filter(|c| !c.is_empty())
                    .ok_or("multi_choice question needs choices")?;
                if !choices.contains_key(self.gold.trim()) {
                    return Err(format!("gold {:?} is not a choice label", self.gold));
                }
            }
            k if k.is_numeric() => {
                let g: f64 = self
                    .gold
                    .trim()
                    .parse()
                    .map_err(|_| format!("gold {:?} is not a number", self.gold))?;
                if !g.is_finite() {
                    return Err("gold is not finite".into());
                }
            }
            _ => {
                if self.gold.trim().is_empty() {
                    return Err("gold is empty".into());
                }
            }
        }
        Ok(())
    }
}

/// Loads a JSONL question file. Every question must belong to `dataset`.
/// With `count_check`, sizes must match the full benchmark.
pub fn load_dataset(path: &Path, dataset: DatasetId, count_check: bool) -> Result<Vec<Question>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let at = |line: usize, msg: String| HarnessError::Dataset {
        path: path.to_path_buf(),
        line,
        message: msg,
    };
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let q: Question = serde_json::from_str(line).map_err(|e| at(n, e.to_string()))?;
        q.validate().map_err(|m| at(n, m))?;
        if q.dataset != dataset {
            return Err(at(n, format!("question belongs to {}, expected {dataset}", q.dataset)));
        }
        if !seen.insert(q.id.clone()) {
            return Err(at(n, format!("duplicate question id {:?}", q.id)));
        }
        out.push(q);
    }
    if count_check {
        check_counts(&out, dataset).map_err(|m| at(0, m))?;
    }
    Ok(out)
}

fn check_counts(questions: &[Question], dataset: DatasetId) -> Result<(), String> {
    let expected = dataset.expected_count();
    if questions.len() != expected {
        return Err(format!(
            "{dataset} has {} questions, the full benchmark has {expected} (pass --no-count-check for partial files)",
            questions.len()
        ));
    }
    if let Some((tasks, per_task)) = dataset.task_layout() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for q in questions {
            *counts.entry(q.task.as_str()).or_default() += 1;
        }
        if counts.len() != tasks || counts.values().any(|&c| c != per_task) {
            return Err(format!("{dataset} should have {tasks} tasks of {per_task} questions, found {counts:?}"));
        }
    }
    Ok(())
}

/// Retrieval query: the trimmed question text alone, never the choices.
pub fn build_query(q: &Question) -> String {
    q.text.trim().to_string()
}
