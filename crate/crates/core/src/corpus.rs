//! Snippet store: ingestion of raw documents from the six corpus sources,
//! paragraph-preferred chunking, content-addressed ids, deduplication and
//! the corpus manifest.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chemrag_chem::Exec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_MAX_TOKENS: usize = 512;
pub const MIN_MAX_TOKENS: usize = 32;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNIPPETS_FILE: &str = "snippets.jsonl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("chunk size {0} is below the minimum of {MIN_MAX_TOKENS} tokens")]
    ChunkTooSmall(usize),
    #[error("snippet store not found at {0}")]
    NotFound(PathBuf),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown source kind {0:?}")]
    UnknownSource(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Pubchem,
    Pubmed,
    Uspto,
    SemanticScholar,
    Openstax,
    Wikipedia,
}

impl SourceKind {
    pub const ALL: [SourceKind; 6] = [
        SourceKind::Pubchem,
        SourceKind::Pubmed,
        SourceKind::Uspto,
        SourceKind::SemanticScholar,
        SourceKind::Openstax,
        SourceKind::Wikipedia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Pubchem => "pubchem",
            SourceKind::Pubmed => "pubmed",
            SourceKind::Uspto => "uspto",
            SourceKind::SemanticScholar => "semantic_scholar",
            SourceKind::Openstax => "openstax",
            SourceKind::Wikipedia => "wikipedia",
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SourceKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownSource(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub source: SourceKind,
    pub external_id: String,
    #[serde(default)]
    pub title: Option<String>,
    pub body: String,
}

/// Structured PubChem compound record, rendered into a single snippet.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PubChemRecord {
    #[serde(default, alias = "cid")]
    pub external_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub smiles: Option<String>,
    #[serde(default)]
    pub iupac: Option<String>,
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl PubChemRecord {
    /// Fields in fixed order: name, SMILES, IUPAC name, formula, weight, synonyms.
    pub fn render(&self) -> RawDocument {
        let mut parts = Vec::new();
        if let Some(v) = &self.name {
            parts.push(format!("Name: {v}."));
        }
        if let Some(v) = &self.smiles {
            parts.push(format!("SMILES: {v}"));
        }
        if let Some(v) = &self.iupac {
            parts.push(format!("IUPAC name: {v}."));
        }
        if let Some(v) = &self.formula {
            parts.push(format!("Molecular formula: {v}."));
        }
        if let Some(v) = self.weight {
            parts.push(format!("Molecular weight: {v}."));
        }
        if !self.synonyms.is_empty() {
            parts.push(format!("Synonyms: {}.", self.synonyms.join("; ")));
        }
        RawDocument {
            source: SourceKind::Pubchem,
            external_id: self.external_id.clone(),
            title: self.name.clone(),
            body: parts.join(" "),
        }
    }
}

/// One line of an input file: a plain document or, for PubChem, a
/// structured compound record.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum InputRecord {
    Document(RawDocument),
    Compound(PubChemRecord),
}

impl InputRecord {
    pub fn into_document(self) -> RawDocument {
        match self {
            InputRecord::Document(d) => d,
            InputRecord::Compound(c) => c.render(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub max_tokens: usize,
    pub paragraph_preferred: bool,
}

impl Default for ChunkParams {
    fn default() -> Self {
        ChunkParams {
            max_tokens: DEFAULT_MAX_TOKENS,
            paragraph_preferred: true,
        }
    }
}

impl ChunkParams {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_tokens < MIN_MAX_TOKENS {
            return Err(CorpusError::ChunkTooSmall(self.max_tokens));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "SnippetRecord", into = "SnippetRecord")]
pub struct Snippet {
    pub id: String,
    pub source: SourceKind,
    pub title: Option<String>,
    pub text: String,
    pub token_count: usize,
}

/// On-disk form; the token count is recomputed when reading.
#[derive(Serialize, Deserialize)]
struct SnippetRecord {
    id: String,
    source: SourceKind,
    title: Option<String>,
    text: String,
}

impl From<SnippetRecord> for Snippet {
    fn from(r: SnippetRecord) -> Self {
        let token_count = r.text.split_whitespace().count();
        Snippet {
            id: r.id,
            source: r.source,
            title: r.title,
            text: r.text,
            token_count,
        }
    }
}

impl From<Snippet> for SnippetRecord {
    fn from(s: Snippet) -> Self {
        SnippetRecord {
            id: s.id,
            source: s.source,
            title: s.title,
            text: s.text,
        }
    }
}

impl Snippet {
    /// Builds a snippet from text, normalizing it and deriving the id.
    pub fn new(source: SourceKind, title: Option<String>, text: &str) -> Self {
        let text = normalize_text(text);
        Snippet {
            id: snippet_id(source, &text),
            source,
            title,
            token_count: text.split_whitespace().count(),
            text,
        }
    }
}

/// NFC, whitespace runs collapsed to one space, trimmed.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Hex SHA-256 of `source \0 normalized_text`.
pub fn snippet_id(source: SourceKind, normalized_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(source.as_str().as_bytes());
    h.update([0u8]);
    h.update(normalized_text.as_bytes());
    hex::encode(h.finalize())
}

fn paragraphs(body: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in body.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.extend(line.split_whitespace());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Splits a document into snippets of at most `max_tokens` whitespace tokens.
/// Whole paragraphs are packed greedily; a paragraph longer than the limit is
/// cut at token boundaries.
pub fn chunk_document(doc: &RawDocument, params: &ChunkParams) -> Vec<Snippet> {
    let max = params.max_tokens.max(1);
    let normalized: String = doc.body.nfc().collect();
    let paras = if params.paragraph_preferred {
        paragraphs(&normalized)
    } else {
        vec![normalized.split_whitespace().collect()]
    };
    let mut groups: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for para in paras {
        if para.is_empty() {
            continue;
        }
        if current.len() + para.len() <= max {
            current.extend(para);
            continue;
        }
        if !current.is_empty() {
            groups.push(std::mem::take(&mut current));
        }
        if para.len() <= max {
            current = para;
        } else {
            let mut pieces = para.chunks(max).map(<[&str]>::to_vec).collect::<Vec<_>>();
            current = pieces.pop().unwrap_or_default();
            groups.extend(pieces);
        }
    }
    if !current.is_empty() {
        groups.push(current);
    }
    groups
        .into_iter()
        .map(|tokens| Snippet::new(doc.source, doc.title.clone(), &tokens.join(" ")))
        .collect()
}

/// Per-record failure during ingestion; the stream continues past it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordFailure {
    pub external_id: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub documents: usize,
    pub snippets: usize,
    pub duplicates: usize,
    pub skipped_empty: usize,
    pub failures: Vec<RecordFailure>,
}

/// Chunks every document (in parallel when enabled) and deduplicates the
/// result in input order.
pub fn ingest_source(
    records: impl IntoIterator<Item = Result<RawDocument, RecordFailure>>,
    params: &ChunkParams,
    exec: Exec,
) -> Result<(Vec<Snippet>, IngestReport), CorpusError> {
    params.validate()?;
    let mut report = IngestReport::default();
    let mut docs = Vec::new();
    for record in records {
        match record {
            Ok(doc) if doc.body.trim().is_empty() => {
                log::warn!("skipping empty document {}", doc.external_id);
                report.skipped_empty += 1;
            }
            Ok(doc) => docs.push(doc),
            Err(failure) => report.failures.push(failure),
        }
    }
    report.documents = docs.len();
    let chunked = exec.map(&docs, |d| chunk_document(d, params));
    let all: Vec<Snippet> = chunked.into_iter().flatten().collect();
    let before = all.len();
    let unique: Vec<Snippet> = dedup(all).collect();
    report.duplicates = before - unique.len();
    report.snippets = unique.len();
    Ok((unique, report))
}

/// Keeps the first snippet per (source, normalized text).
pub fn dedup(snippets: impl IntoIterator<Item = Snippet>) -> impl Iterator<Item = Snippet> {
    let mut seen = HashSet::new();
    snippets
        .into_iter()
        .filter(move |s| seen.insert(snippet_id(s.source, &normalize_text(&s.text))))
}

/// Reads an input JSONL file. Lines that fail to parse become per-record
/// failures; `source_override` forces the source of every record.
pub fn read_raw_documents(
    path: &Path,
    source_override: Option<SourceKind>,
) -> Result<Vec<Result<RawDocument, RecordFailure>>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line).and_then(|mut v| {
            if let (Some(src), Some(obj)) = (source_override, v.as_object_mut()) {
                obj.insert("source".into(), src.as_str().into());
            }
            serde_json::from_value::<InputRecord>(v)
        });
        out.push(match parsed {
            Ok(rec) => Ok(rec.into_document()),
            Err(e) => {
                let external_id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("external_id").and_then(|x| x.as_str()).map(String::from))
                    .unwrap_or_else(|| format!("line {}", i + 1));
                Err(RecordFailure {
                    external_id,
                    message: e.to_string(),
                })
            }
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub snippet_counts: BTreeMap<SourceKind, usize>,
    pub mean_token_length: BTreeMap<SourceKind, f64>,
    pub total_snippets: usize,
    pub created_at: String,
    pub chunking: Option<ChunkParams>,
}

impl CorpusManifest {
    pub fn from_snippets(snippets: &[Snippet], chunking: Option<ChunkParams>) -> Self {
        let mut counts: BTreeMap<SourceKind, usize> = BTreeMap::new();
        let mut tokens: BTreeMap<SourceKind, usize> = BTreeMap::new();
        for s in snippets {
            *counts.entry(s.source).or_default() += 1;
            *tokens.entry(s.source).or_default() += s.token_count;
        }
        let mean_token_length = counts
            .iter()
            .map(|(k, &c)| (*k, tokens[k] as f64 / c as f64))
            .collect();
        CorpusManifest {
            snippet_counts: counts,
            mean_token_length,
            total_snippets: snippets.len(),
            created_at: chrono::Utc::now().to_rfc3339(),
            chunking,
        }
    }

    pub fn count(&self, source: SourceKind) -> usize {
        self.snippet_counts.get(&source).copied().unwrap_or(0)
    }
}

/// A snippet store directory: `snippets.jsonl` plus `manifest.json`.
#[derive(Clone, Debug)]
pub struct SnippetStore {
    dir: PathBuf,
}

impl SnippetStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnippetStore { dir: dir.into() }
    }

    /// Accepts either the store directory or its `snippets.jsonl`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let dir = if path.is_file() {
            path.parent().unwrap_or(Path::new(".")).to_path_buf()
        } else {
            path.to_path_buf()
        };
        let store = SnippetStore { dir };
        if !store.snippets_path().is_file() {
            return Err(CorpusError::NotFound(store.snippets_path()));
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn snippets_path(&self) -> PathBuf {
        self.dir.join(SNIPPETS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    /// Writes snippets then the manifest. Snippet output is byte-identical for
    /// identical input.
    pub fn write(
        &self,
        snippets: &[Snippet],
        chunking: Option<ChunkParams>,
    ) -> Result<CorpusManifest, CorpusError> {
        std::fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        let path = self.snippets_path();
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        for s in snippets {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        let manifest = CorpusManifest::from_snippets(snippets, chunking);
        let mpath = self.manifest_path();
        std::fs::write(&mpath, serde_json::to_vec_pretty(&manifest)?).map_err(io_err(&mpath))?;
        Ok(manifest)
    }

    pub fn load(&self) -> Result<Vec<Snippet>, CorpusError> {
        let path = self.snippets_path();
        let file = File::open(&path).map_err(|_| CorpusError::NotFound(path.clone()))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Snippet = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn read_manifest(&self) -> Result<CorpusManifest, CorpusError> {
        let path = self.manifest_path();
        let bytes = std::fs::read(&path).map_err(|_| CorpusError::NotFound(path.clone()))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Recomputes the manifest from a full rescan of the store. Chunking
/// parameters are carried over from the stored manifest when present.
pub fn corpus_stats(store: &SnippetStore) -> Result<CorpusManifest, CorpusError> {
    let snippets = store.load()?;
    let chunking = store.read_manifest().ok().and_then(|m| m.chunking);
    Ok(CorpusManifest::from_snippets(&snippets, chunking))
}
