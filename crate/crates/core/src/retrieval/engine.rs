use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dense::{search_dense_filtered, DenseIndex, Embedder};
use super::fusion::{fuse_rrf, FusionParams, DEFAULT_FUSION_DEPTH};
use super::lexical::LexicalIndex;
use super::ranked::RankedList;
use super::RetrievalError;
use crate::corpus::{Snippet, SourceKind};
use crate::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    Bm25,
    Contriever,
    Specter,
    E5,
    Rrf,
}

impl Retriever {
    pub const ALL: [Retriever; 5] = [
        Retriever::Bm25,
        Retriever::Contriever,
        Retriever::Specter,
        Retriever::E5,
        Retriever::Rrf,
    ];
    pub const COMPONENTS: [Retriever; 4] =
        [Retriever::Bm25, Retriever::Contriever, Retriever::Specter, Retriever::E5];

    pub fn as_str(self) -> &'static str {
        match self {
            Retriever::Bm25 => "bm25",
            Retriever::Contriever => "contriever",
            Retriever::Specter => "specter",
            Retriever::E5 => "e5",
            Retriever::Rrf => "rrf",
        }
    }

    pub fn is_dense(self) -> bool {
        matches!(self, Retriever::Contriever | Retriever::Specter | Retriever::E5)
    }
}

impl fmt::Display for Retriever {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Retriever {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Retriever::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| RetrievalError::UnknownRetriever(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Retrieved {
    pub snippet: Snippet,
    pub score: f64,
}

/// Uniform `retrieve(retriever, query, k)` over whichever indices are loaded.
pub struct RetrievalEngine {
    snippets: HashMap<String, Snippet>,
    lexical: Option<LexicalIndex>,
    dense: BTreeMap<Retriever, (DenseIndex, Arc<dyn Embedder>)>,
    fusion: FusionParams,
    fusion_depth: usize,
    exec: Exec,
    source_filter: Option<SourceKind>,
    masks: HashMap<Retriever, Vec<bool>>,
}

impl RetrievalEngine {
    pub fn new(snippets: impl IntoIterator<Item = Snippet>) -> Self {
        RetrievalEngine {
            snippets: snippets.into_iter().map(|s| (s.id.clone(), s)).collect(),
            lexical: None,
            dense: BTreeMap::new(),
            fusion: FusionParams::default(),
            fusion_depth: DEFAULT_FUSION_DEPTH,
            exec: Exec::default(),
            source_filter: None,
            masks: HashMap::new(),
        }
    }

    fn check_ids(&self, ids: &[String], what: &str) -> Result<(), RetrievalError> {
        match ids.iter().find(|id| !self.snippets.contains_key(*id)) {
            Some(id) => Err(RetrievalError::Corrupt(format!(
                "{what} index references snippet {id} absent from the corpus; rebuild it against this corpus"
            ))),
            None => Ok(()),
        }
    }

    pub fn with_lexical(mut self, index: LexicalIndex) -> Result<Self, RetrievalError> {
        self.check_ids(index.ids(), "bm25")?;
        self.lexical = Some(index);
        self.refresh_masks();
        Ok(self)
    }

    pub fn with_dense(
        mut self,
        retriever: Retriever,
        index: DenseIndex,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, RetrievalError> {
        if !retriever.is_dense() {
            return Err(RetrievalError::InvalidParams(format!("{retriever} is not a dense retriever")));
        }
        if embedder.profile() != index.profile() {
            return Err(RetrievalError::ProfileMismatch {
                index: index.profile().to_string(),
                embedder: embedder.profile().to_string(),
            });
        }
        self.check_ids(index.ids(), retriever.as_str())?;
        self.dense.insert(retriever, (index, embedder));
        self.refresh_masks();
        Ok(self)
    }

    pub fn with_fusion(mut self, params: FusionParams, depth: usize) -> Result<Self, RetrievalError> {
        if params.c == 0 || depth == 0 {
            return Err(RetrievalError::InvalidParams("fusion c and depth must be >= 1".into()));
        }
        self.fusion = params;
        self.fusion_depth = depth;
        Ok(self)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Restricts every retriever to snippets from one source.
    pub fn with_source_filter(mut self, source: Option<SourceKind>) -> Self {
        self.source_filter = source;
        self.refresh_masks();
        self
    }

    fn refresh_masks(&mut self) {
        self.masks.clear();
        let Some(src) = self.source_filter else { return };
        let mask = |ids: &[String]| -> Vec<bool> {
            ids.iter().map(|id| self.snippets[id].source == src).collect()
        };
        let mut masks = HashMap::new();
        if let Some(l) = &self.lexical {
            masks.insert(Retriever::Bm25, mask(l.ids()));
        }
        for (r, (d, _)) in &self.dense {
            masks.insert(*r, mask(d.ids()));
        }
        self.masks = masks;
    }

    pub fn available(&self) -> Vec<Retriever> {
        let mut v = Vec::new();
        if self.lexical.is_some() {
            v.push(Retriever::Bm25);
        }
        v.extend(self.dense.keys().copied());
        if Retriever::COMPONENTS.iter().all(|r| v.contains(r)) {
            v.push(Retriever::Rrf);
        }
        v
    }

    pub fn snippet(&self, id: &str) -> Option<&Snippet> {
        self.snippets.get(id)
    }

    pub fn corpus_len(&self) -> usize {
        self.snippets.len()
    }

    fn missing(r: Retriever) -> RetrievalError {
        let hint = if r == Retriever::Bm25 {
            "chemrag index build --kind lexical".to_string()
        } else {
            format!("chemrag index build --kind dense --embedder {r}")
        };
        RetrievalError::MissingIndex(format!("no {r} index is loaded; build it with `{hint}`"))
    }

    pub fn rank(&self, retriever: Retriever, query: &str, k: usize) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let mask = self.masks.get(&retriever).map(Vec::as_slice);
        match retriever {
            Retriever::Bm25 => self
                .lexical
                .as_ref()
                .ok_or_else(|| Self::missing(retriever))?
                .search_filtered(query, k, mask),
            Retriever::Rrf => {
                let lists = Retriever::COMPONENTS
                    .iter()
                    .map(|&r| self.rank(r, query, self.fusion_depth))
                    .collect::<Result<Vec<_>, _>>()?;
                fuse_rrf(&lists, self.fusion, k)
            }
            dense => {
                let (index, embedder) = self.dense.get(&dense).ok_or_else(|| Self::missing(dense))?;
                search_dense_filtered(index, query, k, embedder.as_ref(), mask, self.exec)
            }
        }
    }

    pub fn retrieve(&self, retriever: Retriever, query: &str, k: usize) -> Result<Vec<Retrieved>, RetrievalError> {
        self.rank(retriever, query, k)?
            .entries()
            .iter()
            .map(|e| {
                self.snippets
                    .get(&e.id)
                    .map(|s| Retrieved { snippet: s.clone(), score: e.score })
                    .ok_or_else(|| RetrievalError::NotFound(e.id.clone()))
            })
            .collect()
    }
}
