use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, REASONING_ROUNDS};
use super::dataset::{build_query, load_dataset, DatasetId, Question, QuestionKind};
use super::extract::extract_answer;
use super::prompt::{render_prompt, Passage, PromptKind};
use super::score::{metrics_for, primary_metric, score_item};
use super::HarnessError;
use crate::corpus::{SnippetStore, SourceKind};
use crate::gateway::{Gateway, GatewayEmbedder, ModelProfile, ProfileKind, ProfileRegistry, ResponseCache};
use crate::metrics::{ScoreValue, UNPARSED};
use crate::retrieval::{load_index, RetrievalEngine, Retriever, StoredIndex};
use crate::Exec;

/// Share of errored items above which a run is marked degraded.
pub const DEGRADED_FRACTION: f64 = 0.2;
pub const DEFAULT_TOP_N: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievedRef {
    pub id: String,
    pub score: f64,
    pub source: SourceKind,
}

/// Everything recorded for one question. Exactly one of `scores` and
/// `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub question_id: String,
    pub dataset: DatasetId,
    pub task: String,
    pub kind: QuestionKind,
    pub query: String,
    pub retrieved: Vec<RetrievedRef>,
    pub prompt_kind: PromptKind,
    pub prompt: String,
    pub responses: Vec<String>,
    pub extracted: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<ScoreValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ItemResult {
    pub fn is_unparsed(&self) -> bool {
        self.extracted.iter().any(|e| e == UNPARSED)
    }

    /// Value of a metric, 0 for errored items or missing metrics.
    pub fn metric(&self, name: &str) -> f64 {
        self.scores
            .iter()
            .flatten()
            .find(|s| s.metric == name)
            .map_or(0.0, |s| s.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub dataset: DatasetId,
    pub task: String,
    pub kind: QuestionKind,
    pub primary_metric: String,
    pub items: usize,
    pub errored: usize,
    pub unparsed: usize,
    pub primary: f64,
    pub metrics: IndexMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub items: usize,
    pub scored: usize,
    pub errored: usize,
    pub unparsed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub created_at: String,
    pub config: RunConfig,
    pub rounds: u32,
    pub degraded: bool,
    pub counts: Counts,
    pub tasks: Vec<TaskSummary>,
    /// Mean of task primaries per dataset.
    pub datasets: IndexMap<DatasetId, f64>,
    /// Unweighted mean of the dataset composites.
    pub overall: f64,
}

/// Task, dataset and overall aggregates. Errored items count as 0 on
/// every metric of their task.
pub fn aggregate(items: &[ItemResult]) -> (Vec<TaskSummary>, IndexMap<DatasetId, f64>, f64, Counts) {
    let mut groups: BTreeMap<(DatasetId, &str), Vec<&ItemResult>> = BTreeMap::new();
    for it in items {
        groups.entry((it.dataset, it.task.as_str())).or_default().push(it);
    }
    let mut tasks = Vec::new();
    for ((dataset, task), group) in groups {
        let kind = group[0].kind;
        let n = group.len() as f64;
        let metrics: IndexMap<String, f64> = metrics_for(kind)
            .iter()
            .map(|m| (m.to_string(), group.iter().map(|it| it.metric(m)).sum::<f64>() / n))
            .collect();
        let primary_metric = primary_metric(kind);
        tasks.push(TaskSummary {
            dataset,
            task: task.to_string(),
            kind,
            primary_metric: primary_metric.into(),
            items: group.len(),
            errored: group.iter().filter(|it| it.error.is_some()).count(),
            unparsed: group.iter().filter(|it| it.is_unparsed()).count(),
            primary: metrics[primary_metric],
            metrics,
        });
    }
    let mut datasets = IndexMap::new();
    for d in DatasetId::ALL {
        let prim: Vec<f64> = tasks.iter().filter(|t| t.dataset == d).map(|t| t.primary).collect();
        if !prim.is_empty() {
            datasets.insert(d, prim.iter().sum::<f64>() / prim.len() as f64);
        }
    }
    let overall = if datasets.is_empty() {
        0.0
    } else {
        datasets.values().sum::<f64>() / datasets.len() as f64
    };
    let errored = items.iter().filter(|it| it.error.is_some()).count();
    let counts = Counts {
        items: items.len(),
        scored: items.len() - errored,
        errored,
        unparsed: items.iter().filter(|it| it.is_unparsed()).count(),
    };
    (tasks, datasets, overall, counts)
}

/// Models, cache and retrieval state shared by the items of a run.
pub struct RunContext {
    pub registry: ProfileRegistry,
    pub gateway: Arc<Gateway>,
    pub engine: Option<RetrievalEngine>,
}

impl RunContext {
    /// Built-in profiles plus the config's profile file, an HTTP gateway
    /// and the configured indices. `cache_override` replaces `cache_dir`.
    pub fn from_config(cfg: &RunConfig, cache_override: Option<&Path>) -> Result<Self, HarnessError> {
        let mut registry = ProfileRegistry::builtin();
        if let Some(p) = &cfg.profiles {
            registry.merge_file(p)?;
        }
        let cache_dir = cache_override.map(Path::to_path_buf).or_else(|| cfg.cache_dir.clone());
        let gateway = Arc::new(Gateway::new(cache_dir.map(ResponseCache::new)));
        RunContext::with_gateway(cfg, registry, gateway)
    }

    pub fn with_gateway(cfg: &RunConfig, registry: ProfileRegistry, gateway: Arc<Gateway>) -> Result<Self, HarnessError> {
        let engine = if cfg.retrieves() {
            Some(build_engine(cfg, &registry, &gateway, &cfg.required_retrievers())?)
        } else {
            None
        };
        Ok(RunContext { registry, gateway, engine })
    }
}

/// Loads the corpus and the listed retrievers' indices.
pub fn build_engine(
    cfg: &RunConfig,
    registry: &ProfileRegistry,
    gateway: &Arc<Gateway>,
    retrievers: &[Retriever],
) -> Result<RetrievalEngine, HarnessError> {
    let dir = cfg
        .corpus_dir
        .as_ref()
        .ok_or_else(|| HarnessError::Config("retrieval needs corpus_dir".into()))?;
    let snippets = SnippetStore::open(dir)?.load()?;
    let mut engine = RetrievalEngine::new(snippets);
    for &r in retrievers {
        let path = cfg.indices.get(&r).ok_or_else(|| {
            HarnessError::Config(format!("no {r} index configured; add it under indices"))
        })?;
        let loaded = load_index(path)?;
        engine = match (r.is_dense(), loaded.index) {
            (false, StoredIndex::Lexical(ix)) => engine.with_lexical(ix)?,
            (true, StoredIndex::Dense(ix)) => {
                let profile = registry.get(ix.profile())?.clone();
                let embedder = GatewayEmbedder::new(gateway.clone(), profile)?;
                engine.with_dense(r, ix, Arc::new(embedder))?
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "index at {} is the wrong kind for retriever {r}",
                    path.display()
                )))
            }
        };
    }
    Ok(engine.with_source_filter(cfg.source_filter()?))
}

pub fn rounds_for(cfg: &RunConfig, profile: &ModelProfile) -> u32 {
    cfg.rounds.unwrap_or(if profile.reasoning { REASONING_ROUNDS } else { 1 })
}

fn mean_scores(rounds: &[Vec<ScoreValue>]) -> Vec<ScoreValue> {
    let n = rounds.len() as f64;
    rounds[0]
        .iter()
        .map(|s| {
            let total: f64 = rounds
                .iter()
                .map(|r| r.iter().find(|x| x.metric == s.metric).map_or(0.0, |x| x.value))
                .sum();
            ScoreValue::new(s.metric.clone(), total / n)
        })
        .collect()
}

fn run_item(cfg: &RunConfig, ctx: &RunContext, profile: &ModelProfile, rounds: u32, q: &Question) -> ItemResult {
    let prompt_kind = PromptKind::select(q.kind, cfg.mode);
    let mut item = ItemResult {
        question_id: q.id.clone(),
        dataset: q.dataset,
        task: q.task.clone(),
        kind: q.kind,
        query: build_query(q),
        retrieved: Vec::new(),
        prompt_kind,
        prompt: String::new(),
        responses: Vec::new(),
        extracted: Vec::new(),
        scores: None,
        error: None,
    };
    let result = (|| -> Result<Vec<ScoreValue>, HarnessError> {
        let mut passages = Vec::new();
        if cfg.retrieves() {
            let engine = ctx
                .engine
                .as_ref()
                .ok_or_else(|| HarnessError::Config("rag run without a retrieval engine".into()))?;
            for r in engine.retrieve(cfg.retriever, &item.query, cfg.k)? {
                item.retrieved.push(RetrievedRef {
                    id: r.snippet.id.clone(),
                    score: r.score,
                    source: r.snippet.source,
                });
                passages.push(Passage { title: r.snippet.title.clone(), text: r.snippet.text.clone() });
            }
        }
        let messages = render_prompt(prompt_kind, q, &passages)?;
        item.prompt = messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        let mut per_round = Vec::new();
        for round in 0..rounds {
            let ex = ctx.gateway.chat_complete(profile, &messages, round)?;
            let answer = extract_answer(&ex.response_text, q);
            per_round.push(score_item(q, &answer).map_err(|e| HarnessError::Metric(e.to_string()))?);
            item.responses.push(ex.response_text);
            item.extracted.push(answer);
        }
        Ok(mean_scores(&per_round))
    })();
    match result {
        Ok(s) => item.scores = Some(s),
        Err(e) => item.error = Some(e.to_string()),
    }
    item
}

fn map_items<F>(n: usize, parallelism: usize, f: F) -> Vec<ItemResult>
where
    F: Fn(usize) -> ItemResult + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            return pool.install(|| Exec::Parallel.map_range(n, &f));
        }
    }
    let _ = parallelism;
    Exec::Sequential.map_range(n, f)
}

pub fn load_questions(cfg: &RunConfig) -> Result<Vec<Question>, HarnessError> {
    let mut out = Vec::new();
    for d in &cfg.datasets {
        out.extend(load_dataset(&d.path, d.id, cfg.count_check)?);
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |e| HarnessError::Io { path: path.to_path_buf(), source: e };
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_items(path: &Path, items: &[ItemResult]) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("item serializes");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn read_items(path: &Path) -> Result<Vec<ItemResult>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Dataset {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_report(path: &Path) -> Result<Report, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn build_report(cfg: &RunConfig, rounds: u32, items: &[ItemResult]) -> Report {
    let (tasks, datasets, overall, counts) = aggregate(items);
    Report {
        run_id: cfg.run_id.clone(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: cfg.clone(),
        rounds,
        degraded: counts.items > 0 && counts.errored as f64 / counts.items as f64 > DEGRADED_FRACTION,
        counts,
        tasks,
        datasets,
        overall,
    }
}

fn persist_run(cfg: &RunConfig, report: &Report, items: &[ItemResult]) -> Result<(), HarnessError> {
    let dir = cfg.run_dir();
    write_items(&dir.join("items.jsonl"), items)?;
    let mut json = serde_json::to_vec_pretty(report).expect("report serializes");
    json.push(b'\n');
    write_file(&dir.join("report.json"), &json)
}

/// Runs every question, writes `items.jsonl` and `report.json` under
/// `<output_dir>/<run_id>/`, and returns the report and items in load
/// order.
pub fn run_benchmark(cfg: &RunConfig, ctx: &RunContext) -> Result<(Report, Vec<ItemResult>), HarnessError> {
    cfg.validate()?;
    let profile = ctx.registry.get(&cfg.model)?.clone();
    if profile.kind != ProfileKind::Chat {
        return Err(HarnessError::Config(format!("{} is not a chat profile", cfg.model)));
    }
    let questions = load_questions(cfg)?;
    let rounds = rounds_for(cfg, &profile);
    let items = map_items(questions.len(), cfg.parallelism, |i| run_item(cfg, ctx, &profile, rounds, &questions[i]));
    let report = build_report(cfg, rounds, &items);
    persist_run(cfg, &report, &items)?;
    Ok((report, items))
}

/// Re-extracts and re-scores a finished run from its stored responses,
/// without calling any model, and rewrites its files.
pub fn rescore_run(run_dir: &Path) -> Result<Report, HarnessError> {
    let old = read_report(&run_dir.join("report.json"))?;
    let mut cfg = old.config.clone();
    cfg.output_dir = run_dir.parent().map(Path::to_path_buf).unwrap_or_default();
    let questions: BTreeMap<String, Question> =
        load_questions(&cfg)?.into_iter().map(|q| (q.id.clone(), q)).collect();
    let mut items = read_items(&run_dir.join("items.jsonl"))?;
    for it in &mut items {
        if it.error.is_some() {
            continue;
        }
        let q = questions.get(&it.question_id).ok_or_else(|| {
            HarnessError::Config(format!("question {} is no longer in the datasets", it.question_id))
        })?;
        let mut per_round = Vec::new();
        it.extracted.clear();
        for r in &it.responses {
            let answer = extract_answer(r, q);
            per_round.push(score_item(q, &answer).map_err(|e| HarnessError::Metric(e.to_string()))?);
            it.extracted.push(answer);
        }
        if per_round.is_empty() {
            return Err(HarnessError::Config(format!("item {} has no responses", it.question_id)));
        }
        it.scores = Some(mean_scores(&per_round));
    }
    let report = build_report(&cfg, old.rounds, &items);
    persist_run(&cfg, &report, &items)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub datasets: IndexMap<DatasetId, f64>,
    pub overall: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let datasets: Vec<DatasetId> = DatasetId::ALL
        .into_iter()
        .filter(|d| rows.iter().any(|r| r.datasets.contains_key(d)))
        .collect();
    let mut s = String::from("k");
    for d in &datasets {
        s.push(',');
        s.push_str(d.as_str());
    }
    s.push_str(",overall\n");
    for r in rows {
        s.push_str(&r.k.to_string());
        for d in &datasets {
            s.push(',');
            if let Some(v) = r.datasets.get(d) {
                s.push_str(&v.to_string());
            }
        }
        s.push_str(&format!(",{}\n", r.overall));
    }
    s
}

/// One rag run per k (run ids `<run_id>-k<k>`), sharing the context and
/// cache. Writes `<output_dir>/<run_id>/sweep.csv`.
pub fn k_sweep(cfg: &RunConfig, ctx: &RunContext, ks: &[usize]) -> Result<Vec<SweepRow>, HarnessError> {
    if ks.is_empty() {
        return Err(HarnessError::Config("no k values given".into()));
    }
    if ks.contains(&0) || cfg.mode != super::prompt::PromptMode::Rag {
        return Err(HarnessError::Config("a k sweep needs rag mode and k >= 1".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        let mut c = cfg.clone();
        c.k = k;
        c.run_id = format!("{}-k{k}", cfg.run_id);
        let (report, _) = run_benchmark(&c, ctx)?;
        rows.push(SweepRow { k, datasets: report.datasets, overall: report.overall });
    }
    write_file(&cfg.run_dir().join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskProportions {
    pub dataset: DatasetId,
    pub task: String,
    /// Retrieved snippets counted for this task.
    pub total: usize,
    pub fractions: IndexMap<SourceKind, f64>,
}

/// Share of each source among the top `top_n` snippets retrieved for each
/// task's questions. Items whose stored list is shorter than `top_n` are
/// re-retrieved at depth `top_n` through `engine`.
pub fn source_proportions(
    cfg: &RunConfig,
    items: &[ItemResult],
    engine: Option<&RetrievalEngine>,
    top_n: usize,
) -> Result<Vec<TaskProportions>, HarnessError> {
    if !cfg.retrieves() {
        return Err(HarnessError::NoRetrieval(cfg.run_id.clone()));
    }
    if top_n == 0 {
        return Err(HarnessError::Config("top_n must be >= 1".into()));
    }
    let mut counts: BTreeMap<(DatasetId, &str), BTreeMap<SourceKind, usize>> = BTreeMap::new();
    for it in items {
        let sources: Vec<SourceKind> = if it.retrieved.len() >= top_n {
            it.retrieved[..top_n].iter().map(|r| r.source).collect()
        } else {
            let engine = engine.ok_or_else(|| {
                HarnessError::Config(format!(
                    "item {} stores {} snippets, fewer than {top_n}; a retrieval engine is needed",
                    it.question_id,
                    it.retrieved.len()
                ))
            })?;
            engine
                .retrieve(cfg.retriever, &it.query, top_n)?
                .into_iter()
                .map(|r| r.snippet.source)
                .collect()
        };
        let c = counts.entry((it.dataset, it.task.as_str())).or_default();
        for s in sources {
            *c.entry(s).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((dataset, task), c)| {
            let total: usize = c.values().sum();
            let fractions = SourceKind::ALL
                .into_iter()
                .map(|s| {
                    let n = c.get(&s).copied().unwrap_or(0);
                    (s, if total == 0 { 0.0 } else { n as f64 / total as f64 })
                })
                .collect();
            TaskProportions { dataset, task: task.to_string(), total, fractions }
        })
        .collect())
}

pub fn proportions_csv(rows: &[TaskProportions]) -> String {
    let mut s = String::from("dataset,task,total");
    for k in SourceKind::ALL {
        s.push(',');
        s.push_str(k.as_str());
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{}", r.dataset, csv_field(&r.task), r.total));
        for k in SourceKind::ALL {
            s.push_str(&format!(",{}", r.fractions[&k]));
        }
        s.push('\n');
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Computes proportions for a finished run and writes `proportions.csv`
/// into its directory.
pub fn run_proportions(
    run_dir: &Path,
    ctx_engine: Option<&RetrievalEngine>,
    top_n: usize,
) -> Result<(PathBuf, Vec<TaskProportions>), HarnessError> {
    let report = read_report(&run_dir.join("report.json"))?;
    let items = read_items(&run_dir.join("items.jsonl"))?;
    let rows = source_proportions(&report.config, &items, ctx_engine, top_n)?;
    let out = run_dir.join("proportions.csv");
    write_file(&out, proportions_csv(&rows).as_bytes())?;
    Ok((out, rows))
}
