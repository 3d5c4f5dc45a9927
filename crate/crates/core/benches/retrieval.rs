use std::hint::black_box;

use chemrag_core::corpus::{ingest_source, read_raw_documents, ChunkParams, Snippet};
use chemrag_core::gateway::{hash32, GatewayError};
use chemrag_core::retrieval::{build_dense_index, build_lexical_index, normalize, tokenize, Bm25Params, Embedder};
use chemrag_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

const QUERIES: [&str; 4] = [
    "ethanol boiling point CCO",
    "palladium catalysed cross coupling yield",
    "ideal gas law pressure volume temperature",
    "enzyme inhibition in cell culture",
];

struct Hash32;

impl Embedder for Hash32 {
    fn profile(&self) -> &str {
        "hash32"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        Ok(texts.iter().map(|t| hash32(t, 7)).collect())
    }
}

fn corpus() -> Vec<Snippet> {
    let path = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus.jsonl"));
    ingest_source(read_raw_documents(path, None).unwrap(), &ChunkParams::default(), Exec::Sequential)
        .unwrap()
        .0
}

fn lexical(c: &mut Criterion) {
    let snippets = corpus();
    let mut g = c.benchmark_group("bm25_build");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, snippets.len()), &snippets, |b, s| {
            b.iter(|| build_lexical_index(black_box(s), Bm25Params::default(), exec).unwrap())
        });
    }
    g.finish();

    let index = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    let terms: Vec<Vec<String>> = QUERIES.iter().map(|q| tokenize(q)).collect();
    let mut g = c.benchmark_group("bm25_queries");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| exec.map(&terms, |t| index.score_all(black_box(t)))));
    }
    g.finish();
}

fn dense(c: &mut Criterion) {
    let snippets = corpus();
    let index = build_dense_index(&snippets, &Hash32).unwrap();
    let queries: Vec<Vec<f32>> = QUERIES.iter().map(|q| normalize(&hash32(q, 7)).unwrap()).collect();
    let mut g = c.benchmark_group("dense_search");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, index.len()), &queries, |b, qs| {
            b.iter(|| {
                for q in qs {
                    black_box(index.search_vector(q, 10, None, exec).unwrap());
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, lexical, dense);
criterion_main!(benches);
