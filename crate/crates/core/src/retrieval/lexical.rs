use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ranked::{top_k_indices, RankedList};
use super::tokenizer::tokenize;
use super::RetrievalError;
use crate::corpus::Snippet;
use crate::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, RetrievalError> {
        let p = Bm25Params { k1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(RetrievalError::InvalidParams(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index over snippets. Documents are numbered in ascending id
/// order; each posting list is sorted by document number.
#[derive(Clone, Debug, PartialEq)]
pub struct LexicalIndex {
    params: Bm25Params,
    ids: Vec<String>,
    doc_lengths: Vec<u32>,
    postings: HashMap<String, Vec<Posting>>,
    avg_doc_length: f64,
}

impl LexicalIndex {
    pub(crate) fn from_parts(
        params: Bm25Params,
        ids: Vec<String>,
        doc_lengths: Vec<u32>,
        postings: HashMap<String, Vec<Posting>>,
    ) -> Result<Self, RetrievalError> {
        params.validate()?;
        if ids.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        if ids.len() != doc_lengths.len() || ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RetrievalError::Corrupt("document ids unsorted or misaligned".into()));
        }
        let n = ids.len() as u32;
        for list in postings.values() {
            if list.is_empty()
                || list.windows(2).any(|w| w[0].doc >= w[1].doc)
                || list.iter().any(|p| p.doc >= n || p.tf == 0)
            {
                return Err(RetrievalError::Corrupt("invalid posting list".into()));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / ids.len() as f64;
        Ok(LexicalIndex { params, ids, doc_lengths, postings, avg_doc_length })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn doc_count(&self) -> usize {
        self.ids.len()
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn position(&self, snippet_id: &str) -> Option<usize> {
        self.ids.binary_search_by(|id| id.as_str().cmp(snippet_id)).ok()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn contribution(&self, idf: f64, tf: u32, len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let norm = if self.avg_doc_length > 0.0 {
            1.0 - b + b * len as f64 / self.avg_doc_length
        } else {
            1.0
        };
        let tf = tf as f64;
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one snippet, summed over `query_terms` in order.
    pub fn bm25_score(&self, query_terms: &[String], snippet_id: &str) -> Result<f64, RetrievalError> {
        let doc = self
            .position(snippet_id)
            .ok_or_else(|| RetrievalError::NotFound(snippet_id.to_string()))?;
        let len = self.doc_lengths[doc];
        let mut score = 0.0;
        for term in query_terms {
            if let Some(list) = self.postings.get(term) {
                if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.doc) {
                    score += self.contribution(self.idf(term), list[i].tf, len);
                }
            }
        }
        Ok(score)
    }

    /// Scores every document for the query terms. Accumulation runs in
    /// query-term order so results match per-document scoring bit for bit.
    pub fn score_all(&self, query_terms: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.ids.len()];
        for term in query_terms {
            if let Some(list) = self.postings.get(term) {
                let idf = self.idf(term);
                for p in list {
                    scores[p.doc as usize] += self.contribution(idf, p.tf, self.doc_lengths[p.doc as usize]);
                }
            }
        }
        scores
    }

    pub fn search(&self, query: &str, k: usize) -> Result<RankedList, RetrievalError> {
        self.search_filtered(query, k, None)
    }

    /// Top-k over documents whose mask entry is true (all when `mask` is None).
    pub fn search_filtered(
        &self,
        query: &str,
        k: usize,
        mask: Option<&[bool]>,
    ) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let terms = tokenize(query);
        if terms.is_empty() {
            return Ok(RankedList::default());
        }
        let scores = self.score_all(&terms);
        let candidates: Vec<(u32, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
            .map(|(i, s)| (i as u32, s))
            .collect();
        Ok(RankedList::from_scored(
            top_k_indices(&candidates, k)
                .into_iter()
                .map(|(i, s)| (self.ids[i as usize].clone(), s)),
            k,
        ))
    }
}

/// Builds the inverted index. Tokenization runs on `exec`; the merge is
/// sequential in id order so the result does not depend on scheduling.
pub fn build_lexical_index(
    snippets: &[Snippet],
    params: Bm25Params,
    exec: Exec,
) -> Result<LexicalIndex, RetrievalError> {
    params.validate()?;
    if snippets.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut docs: Vec<&Snippet> = snippets.iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs.dedup_by(|a, b| a.id == b.id);

    let counted: Vec<(u32, Vec<(String, u32)>)> = exec.map(&docs, |s| {
        let tokens = tokenize(&s.text);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_default() += 1;
        }
        (tokens.len() as u32, tf.into_iter().collect())
    });

    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(docs.len());
    for (doc, (len, tfs)) in counted.into_iter().enumerate() {
        doc_lengths.push(len);
        for (term, tf) in tfs {
            postings.entry(term).or_default().push(Posting { doc: doc as u32, tf });
        }
    }
    let ids = docs.into_iter().map(|s| s.id.clone()).collect();
    LexicalIndex::from_parts(params, ids, doc_lengths, postings)
}

pub fn search_lexical(index: &LexicalIndex, query: &str, k: usize) -> Result<RankedList, RetrievalError> {
    index.search(query, k)
}
