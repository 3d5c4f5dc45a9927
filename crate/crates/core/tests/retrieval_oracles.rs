mod common;

use std::collections::{BTreeMap, HashMap};

use chemrag_core::corpus::{Snippet, SourceKind};
use chemrag_core::retrieval::{
    build_dense_index, build_lexical_index, dot, fuse_rrf, load_index, normalize, save_dense, save_lexical,
    search_dense, search_dense_filtered, search_lexical, tokenize, Bm25Params, FusionParams, RankedList,
    RetrievalEngine, RetrievalError, Retriever, StoredIndex,
};
use chemrag_core::Exec;
use common::{sample_snippets, sort_ranked, HashEmbedder, QUERIES};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Textbook BM25 over raw token lists; shares only the tokenizer.
fn bm25_oracle(snippets: &[Snippet], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let docs: Vec<(String, Vec<String>)> = snippets.iter().map(|s| (s.id.clone(), tokenize(&s.text))).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(|d| d.1.len()).sum::<usize>() as f64 / n;
    let q = tokenize(query);
    let mut out: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, toks)| {
            let mut score = 0.0;
            for term in &q {
                let tf = toks.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.1.contains(term)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let norm = 1.0 - b + b * toks.len() as f64 / avg;
                score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
            (id.clone(), score)
        })
        .collect();
    sort_ranked(&mut out);
    out
}

fn dense_oracle(snippets: &[Snippet], e: &HashEmbedder, query: &str) -> Vec<(String, f64)> {
    use chemrag_core::retrieval::Embedder;
    let q = normalize(&e.embed(&[query.into()]).unwrap()[0]).unwrap();
    let mut out: Vec<(String, f64)> = snippets
        .iter()
        .map(|s| {
            let v = normalize(&e.embed(std::slice::from_ref(&s.text)).unwrap()[0]).unwrap();
            let cos: f64 = v.iter().zip(&q).map(|(a, b)| *a as f64 * *b as f64).sum();
            (s.id.clone(), cos)
        })
        .collect();
    sort_ranked(&mut out);
    out
}

fn assert_matches(got: &RankedList, want: &[(String, f64)], k: usize, what: &str) {
    assert_eq!(got.len(), k.min(want.len()), "{what}");
    for (i, (e, (id, s))) in got.entries().iter().zip(want).enumerate() {
        assert_eq!(&e.id, id, "{what}: rank {}", i + 1);
        assert!((e.score - s).abs() <= TOL, "{what}: rank {} score {} vs {}", i + 1, e.score, s);
    }
}

#[test]
fn bm25_top10_matches_brute_force() {
    let snippets = sample_snippets(100);
    assert_eq!(snippets.len(), 100);
    let index = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    for q in QUERIES {
        let want = bm25_oracle(&snippets, q, 1.2, 0.75);
        assert_matches(&search_lexical(&index, q, 10).unwrap(), &want, 10, q);
    }
}

#[test]
fn bm25_respects_custom_params() {
    let snippets = sample_snippets(100);
    let index = build_lexical_index(&snippets, Bm25Params::new(2.0, 0.3).unwrap(), Exec::default()).unwrap();
    for q in &QUERIES[..5] {
        assert_matches(&index.search(q, 10).unwrap(), &bm25_oracle(&snippets, q, 2.0, 0.3), 10, q);
    }
}

#[test]
fn bm25_single_doc_score_matches_scan() {
    let snippets = sample_snippets(100);
    let index = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    for q in QUERIES {
        let terms = tokenize(q);
        let scores = index.score_all(&terms);
        for (i, id) in index.ids().iter().enumerate() {
            assert_eq!(index.bm25_score(&terms, id).unwrap().to_bits(), scores[i].to_bits());
        }
    }
    assert!(matches!(index.bm25_score(&[], "nope"), Err(RetrievalError::NotFound(_))));
}

#[test]
fn dense_top10_matches_brute_force() {
    let snippets = sample_snippets(100);
    let e = HashEmbedder::new("contriever", 1);
    let index = build_dense_index(&snippets, &e).unwrap();
    for q in QUERIES {
        let want = dense_oracle(&snippets, &e, q);
        assert_matches(&search_dense(&index, q, 10, &e).unwrap(), &want, 10, q);
    }
}

#[test]
fn dense_rejects_other_profile() {
    let snippets = sample_snippets(10);
    let index = build_dense_index(&snippets, &HashEmbedder::new("e5", 3)).unwrap();
    let err = search_dense(&index, "x", 3, &HashEmbedder::new("specter", 2)).unwrap_err();
    assert!(matches!(err, RetrievalError::ProfileMismatch { .. }));
}

#[test]
fn sequential_and_parallel_agree() {
    let snippets = sample_snippets(100);
    let a = build_lexical_index(&snippets, Bm25Params::default(), Exec::Sequential).unwrap();
    let b = build_lexical_index(&snippets, Bm25Params::default(), Exec::Parallel).unwrap();
    let e = HashEmbedder::new("specter", 2);
    let dense = build_dense_index(&snippets, &e).unwrap();
    for q in QUERIES {
        assert_eq!(a.search(q, 20).unwrap(), b.search(q, 20).unwrap());
        let s = search_dense_filtered(&dense, q, 20, &e, None, Exec::Sequential).unwrap();
        let p = search_dense_filtered(&dense, q, 20, &e, None, Exec::Parallel).unwrap();
        assert_eq!(s, p);
    }
}

#[test]
fn persisted_indices_search_identically() {
    let snippets = sample_snippets(100);
    let dir = tempfile::tempdir().unwrap();
    let lex = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    let e = HashEmbedder::new("e5", 3);
    let dense = build_dense_index(&snippets, &e).unwrap();
    save_lexical(&lex, &dir.path().join("bm25"), None).unwrap();
    save_dense(&dense, &dir.path().join("e5"), None).unwrap();
    let StoredIndex::Lexical(lex2) = load_index(&dir.path().join("bm25")).unwrap().index else {
        panic!("expected lexical")
    };
    let StoredIndex::Dense(dense2) = load_index(&dir.path().join("e5")).unwrap().index else {
        panic!("expected dense")
    };
    for q in QUERIES {
        assert_eq!(lex.search(q, 10).unwrap(), lex2.search(q, 10).unwrap());
        assert_eq!(search_dense(&dense, q, 10, &e).unwrap(), search_dense(&dense2, q, 10, &e).unwrap());
    }
    for i in 0..dense.len() {
        assert!((dot(dense.vector(i), dense.vector(i)) - 1.0).abs() < 1e-6);
    }
}

fn rrf_oracle(lists: &[Vec<String>], c: f64, k: usize) -> Vec<(String, f64)> {
    let mut ranks: HashMap<&str, Vec<usize>> = HashMap::new();
    for l in lists {
        for (i, id) in l.iter().enumerate() {
            ranks.entry(id).or_default().push(i + 1);
        }
    }
    let mut out: Vec<(String, f64)> = ranks
        .into_iter()
        .map(|(id, mut r)| {
            r.sort_unstable();
            (id.to_string(), r.iter().map(|&r| 1.0 / (c + r as f64)).sum())
        })
        .collect();
    sort_ranked(&mut out);
    out.truncate(k);
    out
}

fn to_ranked(ids: &[String]) -> RankedList {
    let n = ids.len();
    RankedList::from_scored(ids.iter().enumerate().map(|(i, id)| (id.clone(), (n - i) as f64)), n)
}

#[test]
fn rrf_matches_oracle_and_ignores_list_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pool: Vec<String> = (0..250).map(|i| format!("doc{i:03}")).collect();
    for _ in 0..200 {
        let lists: Vec<Vec<String>> = (0..4)
            .map(|_| pool.choose_multiple(&mut rng, 100).cloned().collect())
            .collect();
        let k = rng.random_range(1..=120);
        let ranked: Vec<RankedList> = lists.iter().map(|l| to_ranked(l)).collect();
        let fused = fuse_rrf(&ranked, FusionParams::default(), k).unwrap();
        let want = rrf_oracle(&lists, 60.0, k);
        assert_eq!(fused.len(), want.len());
        for (e, (id, s)) in fused.entries().iter().zip(&want) {
            assert_eq!(&e.id, id);
            assert_eq!(e.score.to_bits(), s.to_bits());
        }
        let mut shuffled = ranked.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(fuse_rrf(&shuffled, FusionParams::default(), k).unwrap(), fused);
    }
}

#[test]
fn rrf_hand_example() {
    let a = to_ranked(&["A".to_string(), "B".to_string()]);
    let b = to_ranked(&["C".to_string(), "B".to_string()]);
    let fused = fuse_rrf(&[a, b], FusionParams::default(), 3).unwrap();
    assert_eq!(fused.ids().next(), Some("B"));
    assert!((fused.entries()[0].score - 2.0 / 62.0).abs() < 1e-12);
}

#[test]
fn engine_rrf_equals_manual_fusion() {
    let snippets = sample_snippets(100);
    let lex = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    let mut engine = RetrievalEngine::new(snippets.clone()).with_lexical(lex.clone()).unwrap();
    let embedders = [
        (Retriever::Contriever, HashEmbedder::new("contriever", 1)),
        (Retriever::Specter, HashEmbedder::new("specter", 2)),
        (Retriever::E5, HashEmbedder::new("e5", 3)),
    ];
    let mut dense = Vec::new();
    for (r, e) in embedders {
        let idx = build_dense_index(&snippets, &e).unwrap();
        dense.push((idx.clone(), HashEmbedder::new(&e.name, e.seed)));
        engine = engine.with_dense(r, idx, std::sync::Arc::new(e)).unwrap();
    }
    for q in QUERIES {
        let mut lists = vec![lex.search(q, 100).unwrap()];
        for (idx, e) in &dense {
            lists.push(search_dense(idx, q, 100, e).unwrap());
        }
        let manual = fuse_rrf(&lists, FusionParams::default(), 5).unwrap();
        assert_eq!(engine.rank(Retriever::Rrf, q, 5).unwrap(), manual, "{q}");
    }
}

#[test]
fn source_filter_restricts_results() {
    let snippets = sample_snippets(100);
    let by_source: BTreeMap<&str, SourceKind> = snippets.iter().map(|s| (s.id.as_str(), s.source)).collect();
    let lex = build_lexical_index(&snippets, Bm25Params::default(), Exec::default()).unwrap();
    let engine = RetrievalEngine::new(snippets.clone())
        .with_lexical(lex)
        .unwrap()
        .with_source_filter(Some(SourceKind::Pubchem));
    for q in QUERIES {
        for id in engine.rank(Retriever::Bm25, q, 10).unwrap().ids() {
            assert_eq!(by_source[id], SourceKind::Pubchem);
        }
    }
}

#[test]
fn missing_retriever_is_reported() {
    let snippets = sample_snippets(10);
    let engine = RetrievalEngine::new(snippets);
    let err = engine.rank(Retriever::Bm25, "x", 3).unwrap_err();
    assert!(err.to_string().contains("index build"), "{err}");
}
