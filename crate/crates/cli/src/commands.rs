use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chemrag_chem::{canonicalize, fingerprint, parse_smiles, tanimoto, FingerprintKind, KeySet};
use chemrag_core::corpus::{
    ingest_source, read_raw_documents, ChunkParams, CorpusError, Snippet, SnippetStore, SourceKind,
};
use chemrag_core::gateway::{Gateway, GatewayEmbedder, GatewayError, ProfileRegistry, ResponseCache};
use chemrag_core::harness::{
    build_engine, k_sweep, read_report, rescore_run, run_benchmark, run_proportions, score_item, sweep_csv,
    HarnessError, Question, extract_answer, QuestionKind, Report, RunConfig, RunContext, DatasetId,
};
use chemrag_core::retrieval::{
    build_dense_index, build_lexical_index, fuse_rrf, load_index, save_dense, save_lexical, search_dense,
    Bm25Params, FusionParams, IndexKind, RankedList, RetrievalError, StoredIndex, DEFAULT_FUSION_DEPTH,
};
use chemrag_core::Exec;
use serde_json::json;

use crate::{Cli, Command, IndexCommand, MolCommand, ProfileArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input; nothing was written.
    Invalid(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn invalid(m: impl Into<String>) -> CliError {
    CliError::Invalid(m.into())
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::InvalidParams(_)
            | RetrievalError::InvalidK
            | RetrievalError::MissingIndex(_)
            | RetrievalError::UnknownRetriever(_)
            | RetrievalError::ProfileMismatch { .. }
            | RetrievalError::EmptyCorpus => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) | GatewayError::Validation(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::NotFound(_) | CorpusError::UnknownSource(_) | CorpusError::ChunkTooSmall(_) => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Dataset { .. } | HarnessError::NoRetrieval(_) => {
                CliError::Invalid(e.to_string())
            }
            HarnessError::Retrieval(r) => r.into(),
            HarnessError::Gateway(g) => g.into(),
            HarnessError::Corpus(c) => c.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { input, out, source, max_tokens } => ingest(input, out, source.as_deref(), *max_tokens),
        Command::Index(IndexCommand::Build { corpus, kind, embedder, out, k1, b, profiles }) => {
            index_build(cli, corpus, kind, embedder.as_deref(), out, *k1, *b, profiles)
        }
        Command::Retrieve { indices, query, k, corpus, profiles } => {
            retrieve(cli, indices, query, *k, corpus.as_deref(), profiles)
        }
        Command::Run => run(cli),
        Command::Sweep { ks } => sweep(cli, ks),
        Command::Proportions { run, top_n } => proportions(cli, run.as_deref(), *top_n),
        Command::Score { kind, pred, gold, run } => match run {
            Some(dir) => rescore(dir),
            None => score(
                kind.as_deref().unwrap_or_default(),
                pred.as_deref().unwrap_or_default(),
                gold.as_deref().unwrap_or_default(),
            ),
        },
        Command::Mol(m) => mol(m),
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("value serializes"));
}

fn registry(args: &ProfileArgs) -> Result<ProfileRegistry, CliError> {
    let mut r = ProfileRegistry::builtin();
    if let Some(p) = &args.profiles {
        r.merge_file(p)?;
    }
    Ok(r)
}

fn gateway(cli: &Cli) -> Arc<Gateway> {
    Arc::new(Gateway::new(cli.cache_dir.clone().map(ResponseCache::new)))
}

fn ingest(input: &Path, out: &Path, source: Option<&str>, max_tokens: usize) -> Result<(), CliError> {
    let source: Option<SourceKind> = source.map(str::parse).transpose()?;
    let params = ChunkParams { max_tokens, ..ChunkParams::default() };
    params.validate()?;
    if !input.is_file() {
        return Err(invalid(format!("input file {} does not exist", input.display())));
    }
    let records = read_raw_documents(input, source)?;
    let (snippets, report) = ingest_source(records, &params, Exec::default())?;
    for f in &report.failures {
        log::warn!("skipped record {}: {}", f.external_id, f.message);
    }
    SnippetStore::new(out).write(&snippets, Some(params))?;
    eprintln!(
        "ingested {} documents into {} snippets ({} duplicates, {} failures)",
        report.documents,
        report.snippets,
        report.duplicates,
        report.failures.len()
    );
    print_json(&report);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn index_build(
    cli: &Cli,
    corpus: &Path,
    kind: &str,
    embedder: Option<&str>,
    out: &Path,
    k1: f64,
    b: f64,
    profiles: &ProfileArgs,
) -> Result<(), CliError> {
    let kind: IndexKind = kind.parse()?;
    let params = Bm25Params::new(k1, b)?;
    let embedder_profile = match (kind, embedder) {
        (IndexKind::Dense, None) => return Err(invalid("dense indices need --embedder <profile>")),
        (IndexKind::Dense, Some(name)) => Some(registry(profiles)?.get(name)?.clone()),
        (IndexKind::Lexical, _) => None,
    };
    let store = SnippetStore::open(corpus)?;
    let snippets = store.load()?;
    let corpus_path = std::fs::canonicalize(store.dir()).unwrap_or_else(|_| store.dir().to_path_buf());
    let header = match embedder_profile {
        None => save_lexical(&build_lexical_index(&snippets, params, Exec::default())?, out, Some(&corpus_path))?,
        Some(profile) => {
            let embedder = GatewayEmbedder::new(gateway(cli), profile)?;
            save_dense(&build_dense_index(&snippets, &embedder)?, out, Some(&corpus_path))?
        }
    };
    eprintln!("wrote {} index over {} snippets to {}", json!(header.kind).as_str().unwrap_or("?"), header.doc_count, out.display());
    print_json(&header);
    Ok(())
}

fn retrieve(
    cli: &Cli,
    indices: &[PathBuf],
    query: &str,
    k: usize,
    corpus: Option<&Path>,
    profiles: &ProfileArgs,
) -> Result<(), CliError> {
    if k == 0 {
        return Err(invalid("--k must be at least 1"));
    }
    let loaded = indices.iter().map(|p| load_index(p)).collect::<Result<Vec<_>, _>>()?;
    let corpus = match corpus {
        Some(c) => c.to_path_buf(),
        None => loaded[0]
            .header
            .corpus
            .clone()
            .ok_or_else(|| invalid("index header records no corpus; pass --corpus"))?,
    };
    let snippets: HashMap<String, Snippet> =
        SnippetStore::open(&corpus)?.load()?.into_iter().map(|s| (s.id.clone(), s)).collect();
    let depth = if loaded.len() > 1 { DEFAULT_FUSION_DEPTH.max(k) } else { k };
    let registry = registry(profiles)?;
    let gw = gateway(cli);
    let mut lists: Vec<RankedList> = Vec::new();
    for ix in loaded {
        lists.push(match ix.index {
            StoredIndex::Lexical(l) => l.search(query, depth)?,
            StoredIndex::Dense(d) => {
                let embedder = GatewayEmbedder::new(gw.clone(), registry.get(d.profile())?.clone())?;
                search_dense(&d, query, depth, &embedder)?
            }
        });
    }
    let ranked = if lists.len() == 1 {
        lists.pop().expect("one list")
    } else {
        fuse_rrf(&lists, FusionParams::default(), k)?
    };
    for (i, e) in ranked.entries().iter().enumerate() {
        let s = snippets
            .get(&e.id)
            .ok_or_else(|| CliError::Runtime(format!("snippet {} is missing from {}", e.id, corpus.display())))?;
        print_json(&Hit {
            rank: i + 1,
            id: &e.id,
            score: e.score,
            source: s.source,
            title: s.title.as_deref(),
            text: &s.text,
        });
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct Hit<'a> {
    rank: usize,
    id: &'a str,
    score: f64,
    source: SourceKind,
    title: Option<&'a str>,
    text: &'a str,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| invalid("this command needs --config <run.json>"))?;
    Ok(RunConfig::load(path)?)
}

fn summarize(report: &Report) -> serde_json::Value {
    json!({
        "run_id": report.run_id,
        "report": report.config.run_dir().join("report.json"),
        "degraded": report.degraded,
        "counts": report.counts,
        "datasets": report.datasets,
        "overall": report.overall,
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let ctx = RunContext::from_config(&cfg, cli.cache_dir.as_deref())?;
    let (report, _) = run_benchmark(&cfg, &ctx)?;
    eprintln!(
        "run {}: {} items, {} errored, {} unparsed, overall {:.2}{}",
        report.run_id,
        report.counts.items,
        report.counts.errored,
        report.counts.unparsed,
        report.overall * 100.0,
        if report.degraded { " (degraded)" } else { "" }
    );
    print_json(&summarize(&report));
    Ok(())
}

fn sweep(cli: &Cli, ks: &[usize]) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(invalid("--ks needs positive k values"));
    }
    let ctx = RunContext::from_config(&cfg, cli.cache_dir.as_deref())?;
    let rows = k_sweep(&cfg, &ctx, ks)?;
    eprintln!("wrote {}", cfg.run_dir().join("sweep.csv").display());
    print!("{}", sweep_csv(&rows));
    Ok(())
}

fn proportions(cli: &Cli, run: Option<&Path>, top_n: usize) -> Result<(), CliError> {
    if top_n == 0 {
        return Err(invalid("--top-n must be at least 1"));
    }
    let dir = match run {
        Some(d) => d.to_path_buf(),
        None => load_config(cli)?.run_dir(),
    };
    let cfg = read_report(&dir.join("report.json"))?.config;
    if !cfg.retrieves() {
        return Err(HarnessError::NoRetrieval(cfg.run_id).into());
    }
    let mut registry = ProfileRegistry::builtin();
    if let Some(p) = &cfg.profiles {
        registry.merge_file(p)?;
    }
    let cache = cli.cache_dir.clone().or_else(|| cfg.cache_dir.clone());
    let gw = Arc::new(Gateway::new(cache.map(ResponseCache::new)));
    let engine = build_engine(&cfg, &registry, &gw, &cfg.required_retrievers())?;
    let (path, rows) = run_proportions(&dir, Some(&engine), top_n)?;
    eprintln!("wrote {} ({} tasks)", path.display(), rows.len());
    print!("{}", std::fs::read_to_string(&path).map_err(|e| CliError::Runtime(e.to_string()))?);
    Ok(())
}

fn score(kind: &str, pred: &str, gold: &str) -> Result<(), CliError> {
    let kind: QuestionKind = serde_json::from_value(json!(kind)).map_err(|_| {
        invalid(format!(
            "unknown kind {kind:?} (multi_choice, numeric, open_text, open_molecule, property_numeric)"
        ))
    })?;
    if kind.is_numeric() && gold.trim().parse::<f64>().is_err() {
        return Err(invalid(format!("gold {gold:?} is not a number")));
    }
    let q = Question {
        id: "cli".into(),
        dataset: DatasetId::MolInstructions,
        task: "cli".into(),
        kind,
        text: String::new(),
        choices: None,
        gold: gold.into(),
    };
    let extracted = extract_answer(pred, &q);
    let scores = score_item(&q, &extracted).map_err(|e| CliError::Runtime(e.to_string()))?;
    let map: serde_json::Map<String, serde_json::Value> =
        scores.into_iter().map(|s| (s.metric, json!(s.value))).collect();
    print_json(&map);
    Ok(())
}

fn rescore(dir: &Path) -> Result<(), CliError> {
    let report = rescore_run(dir)?;
    print_json(&summarize(&report));
    Ok(())
}

fn mol(cmd: &MolCommand) -> Result<(), CliError> {
    match cmd {
        MolCommand::Validate { smiles } => match parse_smiles(smiles) {
            Ok(_) => println!("valid"),
            Err(e) => {
                println!("invalid");
                return Err(invalid(format!("{smiles}: {e}")));
            }
        },
        MolCommand::Canon { smiles } => {
            println!("{}", canonicalize(smiles).map_err(|e| invalid(format!("{smiles}: {e}")))?)
        }
        MolCommand::Sim { a, b, kind } => {
            let kind: FingerprintKind = kind.parse().map_err(|e| invalid(format!("{e}")))?;
            let parse = |s: &String| parse_smiles(s).map_err(|e| invalid(format!("{s}: {e}")));
            let (ma, mb) = (parse(a)?, parse(b)?);
            let keys = KeySet::default_keys();
            let t = tanimoto(&fingerprint(&ma, kind, &keys), &fingerprint(&mb, kind, &keys))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{t}");
        }
    }
    Ok(())
}
