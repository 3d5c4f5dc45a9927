use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ranked::RankedList;
use super::RetrievalError;

/// Per-component list length before fusing.
pub const DEFAULT_FUSION_DEPTH: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionParams {
    pub c: u32,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { c: 60 }
    }
}

impl FusionParams {
    pub fn new(c: u32) -> Result<Self, RetrievalError> {
        if c == 0 {
            return Err(RetrievalError::InvalidParams("RRF constant c must be >= 1".into()));
        }
        Ok(FusionParams { c })
    }
}

/// Reciprocal rank fusion. Each document's reciprocal ranks are summed in
/// ascending rank order, so the fused scores do not depend on list order.
pub fn fuse_rrf(lists: &[RankedList], params: FusionParams, k: usize) -> Result<RankedList, RetrievalError> {
    if lists.is_empty() {
        return Err(RetrievalError::InvalidParams("fusion needs at least one list".into()));
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let c = params.c.max(1) as f64;
    let mut ranks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for list in lists {
        for (i, id) in list.ids().enumerate() {
            ranks.entry(id).or_default().push(i + 1);
        }
    }
    Ok(RankedList::from_scored(
        ranks.into_iter().map(|(id, mut r)| {
            r.sort_unstable();
            (id.to_string(), r.iter().map(|&r| 1.0 / (c + r as f64)).sum::<f64>())
        }),
        k,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(ids: &[&str]) -> RankedList {
        RankedList::from_scored(ids.iter().enumerate().map(|(i, id)| (id.to_string(), 100.0 - i as f64)), 100)
    }

    #[test]
    fn hand_values() {
        let p = FusionParams::default();
        let f = fuse_rrf(&[list(&["d", "x"]), list(&["d", "y"])], p, 10).unwrap();
        assert!((f.entries()[0].score - 2.0 / 61.0).abs() < 1e-15);
        assert!((f.entries()[0].score - 0.032787).abs() < 1e-6);

        let f = fuse_rrf(&[list(&["a", "b"]), list(&["z", "b"])], p, 10).unwrap();
        assert_eq!(f.entries()[0].id, "b");
        assert!((f.entries()[0].score - 2.0 / 62.0).abs() < 1e-15);
        assert!((f.entries()[1].score - 1.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn single_list_order() {
        let l = list(&["q", "c", "m", "a"]);
        let f = fuse_rrf(std::slice::from_ref(&l), FusionParams::default(), 10).unwrap();
        assert_eq!(f.ids().collect::<Vec<_>>(), l.ids().collect::<Vec<_>>());
    }

    #[test]
    fn errors() {
        assert!(FusionParams::new(0).is_err());
        assert!(fuse_rrf(&[], FusionParams::default(), 5).is_err());
        assert!(fuse_rrf(&[list(&["a"])], FusionParams::default(), 0).is_err());
    }
}
