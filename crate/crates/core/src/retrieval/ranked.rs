use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub id: String,
    pub score: f64,
}

/// Descending score, ascending id on ties.
pub fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Scored snippet ids in rank order, without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Sorts by the ranking rule, drops repeated ids (keeping the better
    /// entry) and keeps the first `k`.
    pub fn from_scored(scored: impl IntoIterator<Item = (String, f64)>, k: usize) -> Self {
        let mut entries: Vec<RankedEntry> = scored
            .into_iter()
            .map(|(id, score)| RankedEntry { id, score })
            .collect();
        entries.sort_by(rank_order);
        let mut seen = std::collections::HashSet::new();
        entries.retain(|e| seen.insert(e.id.clone()));
        entries.truncate(k);
        RankedList { entries }
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn truncated(&self, k: usize) -> RankedList {
        RankedList {
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    /// Checks the ordering rule pairwise and that ids are unique.
    pub fn is_well_ordered(&self) -> bool {
        let unique = self
            .entries
            .iter()
            .map(|e| &e.id)
            .collect::<std::collections::HashSet<_>>()
            .len()
            == self.entries.len();
        unique
            && self
                .entries
                .windows(2)
                .all(|w| rank_order(&w[0], &w[1]) == Ordering::Less)
    }
}

/// Indices of the top `k` scores, ordered by descending score then ascending
/// index. Callers keep ids sorted so index order equals id order.
pub(crate) fn top_k_indices(scores: &[(u32, f64)], k: usize) -> Vec<(u32, f64)> {
    let cmp = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let mut v = scores.to_vec();
    if v.len() > k && k > 0 {
        v.select_nth_unstable_by(k - 1, cmp);
        v.truncate(k);
    }
    v.sort_by(cmp);
    v.truncate(k);
    v
}
