//! Lexical, dense and fused retrieval over a snippet corpus.

mod dense;
mod engine;
mod fusion;
mod lexical;
mod persist;
mod ranked;
mod tokenizer;

use std::path::PathBuf;

pub use dense::{build_dense_index, dot, normalize, search_dense, search_dense_filtered, DenseIndex, Embedder, BUILD_BATCH};
pub use engine::{RetrievalEngine, Retrieved, Retriever};
pub use fusion::{fuse_rrf, FusionParams, DEFAULT_FUSION_DEPTH};
pub use lexical::{build_lexical_index, search_lexical, Bm25Params, LexicalIndex, Posting};
pub use persist::{
    load_index, read_header, save_dense, save_lexical, IndexHeader, IndexKind, LoadedIndex, StoredIndex,
    FORMAT_VERSION, INDEX_MAGIC,
};
pub use ranked::{rank_order, RankedEntry, RankedList};
pub use tokenizer::{is_chemical_token, tokenize};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("snippet {0} is not in the index")]
    NotFound(String),
    #[error("vector dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedder returned a zero vector for snippet {0}")]
    DegenerateEmbedding(String),
    #[error("embedding failed for {} snippet(s) starting at {}: {message}", ids.len(), ids.first().map_or("?", String::as_str))]
    EmbeddingFailed { ids: Vec<String>, message: String },
    #[error("query embedding failed: {0}")]
    QueryEmbedding(String),
    #[error("index was built with embedder {index:?} but {embedder:?} was supplied")]
    ProfileMismatch { index: String, embedder: String },
    #[error("{0}")]
    MissingIndex(String),
    #[error("unknown retriever {0:?} (expected bm25, contriever, specter, e5 or rrf)")]
    UnknownRetriever(String),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
