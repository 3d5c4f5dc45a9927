//! Benchmark protocol: datasets, prompts, answer extraction, scoring and
//! run orchestration.

mod config;
mod dataset;
mod extract;
mod prompt;
mod run;
mod score;

use std::path::PathBuf;

pub use config::{DatasetSpec, RunConfig, COMBINED_CORPUS, DEFAULT_K, DEFAULT_SWEEP_KS, REASONING_ROUNDS};
pub use dataset::{build_query, load_dataset, DatasetId, Question, QuestionKind};
pub use extract::{extract_answer, find_numbers};
pub use prompt::{
    audit_prompt, render_choices, render_prompt, render_reference, render_text, Passage, PromptKind, PromptMode,
};
pub use run::{
    aggregate, build_engine, k_sweep, load_questions, proportions_csv, read_items, read_report, rescore_run,
    rounds_for, run_benchmark, run_proportions, source_proportions, sweep_csv, write_items, Counts, ItemResult,
    Report, RetrievedRef, RunContext, SweepRow, TaskProportions, TaskSummary, DEFAULT_TOP_N, DEGRADED_FRACTION,
};
pub use score::{metrics_for, primary_metric, score_item, BLEU_MAX_N};

use crate::corpus::CorpusError;
use crate::gateway::GatewayError;
use crate::retrieval::RetrievalError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}:{line}: {message}", path.display())]
    Dataset { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run {0} was a baseline run and retrieved nothing")]
    NoRetrieval(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
