use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::DatasetId;
use super::prompt::PromptMode;
use super::HarnessError;
use crate::corpus::SourceKind;
use crate::retrieval::Retriever;

/// Corpus id meaning "all sources".
pub const COMBINED_CORPUS: &str = "chemrag";
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_SWEEP_KS: [usize; 4] = [1, 5, 10, 15];
/// Rounds for profiles that sample at non-zero temperature.
pub const REASONING_ROUNDS: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: DatasetId,
    pub path: PathBuf,
}

fn default_retriever() -> Retriever {
    Retriever::Rrf
}
fn default_corpus() -> String {
    COMBINED_CORPUS.into()
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_true() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_parallelism() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    /// Chat profile name.
    pub model: String,
    #[serde(default = "default_retriever")]
    pub retriever: Retriever,
    /// `chemrag` for every source, or one source name.
    #[serde(default = "default_corpus")]
    pub corpus: String,
    /// Snippet store directory; required in rag mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    pub mode: PromptMode,
    /// Defaults to 3 for reasoning profiles and 1 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_true")]
    pub count_check: bool,
    /// Index directory per retriever.
    #[serde(default)]
    pub indices: BTreeMap<Retriever, PathBuf>,
    /// Extra profile registry file merged over the built-ins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl RunConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus_dir.iter_mut().for_each(fix);
        self.profiles.iter_mut().for_each(fix);
        self.cache_dir.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        self.datasets.iter_mut().for_each(|d| fix(&mut d.path));
        self.indices.values_mut().for_each(fix);
    }

    pub fn source_filter(&self) -> Result<Option<SourceKind>, HarnessError> {
        if self.corpus == COMBINED_CORPUS {
            return Ok(None);
        }
        self.corpus.parse().map(Some).map_err(|_| {
            HarnessError::Config(format!(
                "unknown corpus {:?} (use {COMBINED_CORPUS} or a single source name)",
                self.corpus
            ))
        })
    }

    pub fn retrieves(&self) -> bool {
        self.mode == PromptMode::Rag && self.k > 0
    }

    /// Retrievers whose indices this run needs.
    pub fn required_retrievers(&self) -> Vec<Retriever> {
        match self.retriever {
            Retriever::Rrf => Retriever::COMPONENTS.to_vec(),
            r => vec![r],
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.run_id.is_empty()
            || !self.run_id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.run_id.starts_with('.')
        {
            return bad(format!("run_id {:?} must be non-empty and use only [A-Za-z0-9._-]", self.run_id));
        }
        if self.rounds == Some(0) {
            return bad("rounds must be >= 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be >= 1".into());
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        self.source_filter()?;
        if self.retrieves() {
            if self.corpus_dir.is_none() {
                return bad("rag mode needs corpus_dir".into());
            }
            for r in self.required_retrievers() {
                if !self.indices.contains_key(&r) {
                    let hint = if r == Retriever::Bm25 {
                        "--kind lexical".to_string()
                    } else {
                        format!("--kind dense --embedder {r}")
                    };
                    return bad(format!(
                        "retriever {} needs a {r} index; build one with `chemrag index build {hint}` and list it under indices",
                        self.retriever
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}
