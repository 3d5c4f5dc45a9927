//! Pluggable structural keys: each key is a SMILES fragment, and bit `i` is
//! set when key `i` occurs as a subgraph of the molecule.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{Fingerprint, FingerprintKind};
use crate::graph::MolGraph;
use crate::smiles::{parse_smiles, SmilesError};

/// Patterns above this size are rejected; matching is exponential in it.
pub const MAX_PATTERN_ATOMS: usize = 12;

const DEFAULT_KEYS: &str = include_str!("../data/structural_keys.jsonl");

#[derive(Debug, Error)]
pub enum KeySetError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("key {id:?}: pattern does not parse: {source}")]
    Pattern {
        id: String,
        #[source]
        source: SmilesError,
    },
    #[error("key {id:?}: pattern has {atoms} atoms, limit is {MAX_PATTERN_ATOMS}")]
    PatternTooLarge { id: String, atoms: usize },
    #[error("duplicate key id {0:?}")]
    DuplicateId(String),
    #[error("key set is empty")]
    Empty,
}

/// One line of a key set file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyRecord {
    pub id: String,
    pub smiles_fragment: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug)]
pub struct StructuralKey {
    pub record: KeyRecord,
    pub pattern: MolGraph,
}

#[derive(Clone, Debug)]
pub struct KeySet {
    keys: Vec<StructuralKey>,
}

impl KeySet {
    pub fn from_records(records: Vec<KeyRecord>) -> Result<Self, KeySetError> {
        if records.is_empty() {
            return Err(KeySetError::Empty);
        }
        let mut seen = HashSet::new();
        let mut keys = Vec::with_capacity(records.len());
        for record in records {
            if !seen.insert(record.id.clone()) {
                return Err(KeySetError::DuplicateId(record.id));
            }
            let pattern = parse_smiles(&record.smiles_fragment).map_err(|source| {
                KeySetError::Pattern {
                    id: record.id.clone(),
                    source,
                }
            })?;
            if pattern.atom_count() > MAX_PATTERN_ATOMS {
                return Err(KeySetError::PatternTooLarge {
                    id: record.id,
                    atoms: pattern.atom_count(),
                });
            }
            keys.push(StructuralKey { record, pattern });
        }
        Ok(KeySet { keys })
    }

    /// Reads JSONL of `{id, smiles_fragment, description}`; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, KeySetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line)
                .map_err(|source| KeySetError::Json { line: i + 1, source })?;
            records.push(record);
        }
        Self::from_records(records)
    }

    /// The bundled 20 functional-group keys.
    pub fn default_keys() -> Self {
        Self::from_jsonl(DEFAULT_KEYS).expect("bundled key set is valid")
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[StructuralKey] {
        &self.keys
    }
}

/// Structural-key fingerprint; `nbits` equals the number of keys.
pub fn structural_keys(m: &MolGraph, keys: &KeySet) -> Fingerprint {
    let bits = keys
        .keys
        .iter()
        .enumerate()
        .filter(|(_, k)| has_substructure(m, &k.pattern))
        .map(|(i, _)| i as u32);
    Fingerprint::new(FingerprintKind::StructuralKeys, keys.len() as u32, bits)
        .expect("key indices are below the key count")
}

/// True if `pattern` maps injectively into `target` preserving element,
/// aromaticity and bond order (charge and hydrogens ignored).
pub fn has_substructure(target: &MolGraph, pattern: &MolGraph) -> bool {
    if pattern.atom_count() > target.atom_count() || pattern.bonds().len() > target.bonds().len() {
        return false;
    }
    let order = match_order(pattern);
    let mut mapping = vec![usize::MAX; pattern.atom_count()];
    let mut used = vec![false; target.atom_count()];
    extend_match(target, pattern, &order, 0, &mut mapping, &mut used)
}

/// Pattern atoms in BFS order so each atom after the first of its component
/// has an already-mapped neighbor.
fn match_order(pattern: &MolGraph) -> Vec<usize> {
    let n = pattern.atom_count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut head = order.len();
        order.push(root);
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, _) in pattern.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
    }
    order
}

fn extend_match(
    target: &MolGraph,
    pattern: &MolGraph,
    order: &[usize],
    depth: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&p) = order.get(depth) else {
        return true;
    };
    let pa = &pattern.atoms()[p];
    // restrict candidates to neighbors of an already-mapped pattern neighbor
    let anchor = pattern
        .neighbors(p)
        .iter()
        .find(|&&(q, _)| mapping[q] != usize::MAX)
        .map(|&(q, _)| mapping[q]);
    let candidates: Vec<usize> = match anchor {
        Some(t) => target.neighbors(t).iter().map(|&(v, _)| v).collect(),
        None => (0..target.atom_count()).collect(),
    };
    for t in candidates {
        let ta = &target.atoms()[t];
        if used[t]
            || ta.atomic_number != pa.atomic_number
            || ta.aromatic != pa.aromatic
            || target.degree(t) < pattern.degree(p)
        {
            continue;
        }
        let bonds_ok = pattern.neighbors(p).iter().all(|&(q, b)| {
            let mq = mapping[q];
            mq == usize::MAX
                || target
                    .bond_between(t, mq)
                    .is_some_and(|tb| tb.order == pattern.bonds()[b].order)
        });
        if !bonds_ok {
            continue;
        }
        mapping[p] = t;
        used[t] = true;
        if extend_match(target, pattern, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[p] = usize::MAX;
        used[t] = false;
    }
    false
}
