use serde::{Deserialize, Serialize};

use super::ranked::{top_k_indices, RankedList};
use super::RetrievalError;
use crate::corpus::Snippet;
use crate::gateway::GatewayError;
use crate::Exec;

/// Texts per embedding request when building an index.
pub const BUILD_BATCH: usize = 64;

/// Source of text embeddings, identified by a profile name.
pub trait Embedder: Send + Sync {
    fn profile(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    profile: String,
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<f32>,
}

/// Scales to unit length, or None for a zero or non-finite vector.
pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    Some(v.iter().map(|&x| (x as f64 / norm) as f32).collect())
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

impl DenseIndex {
    pub(crate) fn from_parts(
        profile: String,
        dim: usize,
        ids: Vec<String>,
        vectors: Vec<f32>,
    ) -> Result<Self, RetrievalError> {
        if ids.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        if dim == 0 || vectors.len() != ids.len() * dim || ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RetrievalError::Corrupt("dense index shape mismatch".into()));
        }
        let idx = DenseIndex { profile, dim, ids, vectors };
        if let Some(i) = (0..idx.len()).find(|&i| (dot(idx.vector(i), idx.vector(i)).sqrt() - 1.0).abs() > 1e-6) {
            return Err(RetrievalError::Corrupt(format!("vector for {} is not unit length", idx.ids[i])));
        }
        Ok(idx)
    }

    pub fn profile(&self) -> &str {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn raw_vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Exact cosine scores for a unit query vector, one per stored vector.
    pub fn score_all(&self, query: &[f32], exec: Exec) -> Vec<f64> {
        exec.map_range(self.len(), |i| dot(self.vector(i), query))
    }

    pub fn search_vector(
        &self,
        query: &[f32],
        k: usize,
        mask: Option<&[bool]>,
        exec: Exec,
    ) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if query.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        let candidates: Vec<(u32, f64)> = self
            .score_all(query, exec)
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

/// Embeds every snippet and stores unit vectors. Any failure aborts the
/// build; nothing is returned for a partial corpus.
pub fn build_dense_index(
    snippets: &[Snippet],
    embedder: &dyn Embedder,
) -> Result<DenseIndex, RetrievalError> {
    if snippets.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut docs: Vec<&Snippet> = snippets.iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs.dedup_by(|a, b| a.id == b.id);

    let mut dim = None;
    let mut vectors = Vec::new();
    for batch in docs.chunks(BUILD_BATCH) {
        let texts: Vec<String> = batch.iter().map(|s| s.text.clone()).collect();
        let failed = || batch.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let out = embedder.embed(&texts).map_err(|e| RetrievalError::EmbeddingFailed {
            ids: failed(),
            message: e.to_string(),
        })?;
        if out.len() != batch.len() {
            return Err(RetrievalError::EmbeddingFailed {
                ids: failed(),
                message: format!("expected {} vectors, got {}", batch.len(), out.len()),
            });
        }
        for (s, v) in batch.iter().zip(out) {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(RetrievalError::DimensionMismatch { expected: d, got: v.len() });
            }
            let unit = normalize(&v).ok_or_else(|| RetrievalError::DegenerateEmbedding(s.id.clone()))?;
            vectors.extend(unit);
        }
    }
    let ids = docs.into_iter().map(|s| s.id.clone()).collect();
    DenseIndex::from_parts(embedder.profile().to_string(), dim.unwrap_or(0), ids, vectors)
}

pub fn search_dense(
    index: &DenseIndex,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<RankedList, RetrievalError> {
    search_dense_filtered(index, query, k, embedder, None, Exec::default())
}

pub fn search_dense_filtered(
    index: &DenseIndex,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
    mask: Option<&[bool]>,
    exec: Exec,
) -> Result<RankedList, RetrievalError> {
    if embedder.profile() != index.profile() {
        return Err(RetrievalError::ProfileMismatch {
            index: index.profile().to_string(),
            embedder: embedder.profile().to_string(),
        });
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let v = embedder
        .embed(&[query.to_string()])
        .map_err(|e| RetrievalError::QueryEmbedding(e.to_string()))?
        .pop()
        .ok_or_else(|| RetrievalError::QueryEmbedding("no vector returned".into()))?;
    let unit = normalize(&v).ok_or_else(|| RetrievalError::QueryEmbedding("query embedding is zero".into()))?;
    index.search_vector(&unit, k, mask, exec)
}
