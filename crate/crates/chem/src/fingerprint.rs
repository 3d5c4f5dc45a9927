//! Bit-set fingerprints and Tanimoto similarity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::MolGraph;

pub const DEFAULT_MORGAN_RADIUS: usize = 2;
pub const DEFAULT_PATH_MAX_LEN: usize = 7;
pub const DEFAULT_NBITS: u32 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintKind {
    Morgan,
    Path,
    StructuralKeys,
}

impl std::fmt::Display for FingerprintKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FingerprintKind::Morgan => "morgan",
            FingerprintKind::Path => "path",
            FingerprintKind::StructuralKeys => "structural_keys",
        })
    }
}

impl std::str::FromStr for FingerprintKind {
    type Err = FingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "morgan" => Ok(FingerprintKind::Morgan),
            "path" | "rdk" => Ok(FingerprintKind::Path),
            "structural_keys" | "keys" | "maccs" => Ok(FingerprintKind::StructuralKeys),
            other => Err(FingerprintError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("bit count must be a power of two >= 64, got {0}")]
    InvalidBitCount(u32),
    #[error("path length must be at least 1")]
    InvalidPathLength,
    #[error("bit index {index} out of range for {nbits} bits")]
    BitOutOfRange { index: u32, nbits: u32 },
    #[error("cannot compare {0}/{1} bits with {2}/{3} bits")]
    Mismatch(FingerprintKind, u32, FingerprintKind, u32),
    #[error("unknown fingerprint kind {0:?}")]
    UnknownKind(String),
}

/// A fixed-width fingerprint stored as its sorted set-bit indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    kind: FingerprintKind,
    nbits: u32,
    bits: Vec<u32>,
}

impl Fingerprint {
    pub fn new(
        kind: FingerprintKind,
        nbits: u32,
        bits: impl IntoIterator<Item = u32>,
    ) -> Result<Self, FingerprintError> {
        let bits: BTreeSet<u32> = bits.into_iter().collect();
        if let Some(&index) = bits.iter().find(|&&b| b >= nbits) {
            return Err(FingerprintError::BitOutOfRange { index, nbits });
        }
        Ok(Fingerprint {
            kind,
            nbits,
            bits: bits.into_iter().collect(),
        })
    }

    pub fn kind(&self) -> FingerprintKind {
        self.kind
    }

    pub fn nbits(&self) -> u32 {
        self.nbits
    }

    /// Set-bit indices in ascending order.
    pub fn bits(&self) -> &[u32] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, bit: u32) -> bool {
        self.bits.binary_search(&bit).is_ok()
    }
}

/// |A ∩ B| / |A ∪ B|; 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.kind != b.kind || a.nbits != b.nbits {
        return Err(FingerprintError::Mismatch(a.kind, a.nbits, b.kind, b.nbits));
    }
    if a.bits.is_empty() && b.bits.is_empty() {
        return Ok(1.0);
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.bits.len() && j < b.bits.len() {
        match a.bits[i].cmp(&b.bits[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.bits.len() + b.bits.len() - common;
    Ok(common as f64 / union as f64)
}

fn mix(h: u64, x: u64) -> u64 {
    let mut z = (h ^ x).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_words(seed: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(mix(seed, 0), mix)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn check_nbits(nbits: u32) -> Result<(), FingerprintError> {
    if nbits < 64 || !nbits.is_power_of_two() {
        return Err(FingerprintError::InvalidBitCount(nbits));
    }
    Ok(())
}

/// Initial per-atom invariant hashes used by the Morgan fingerprint.
pub fn atom_invariants(m: &MolGraph) -> Vec<u64> {
    (0..m.atom_count())
        .map(|i| {
            let a = &m.atoms()[i];
            hash_words(
                0x4d4f_5247,
                [
                    a.atomic_number as u64,
                    a.charge as i64 as u64,
                    m.degree(i) as u64,
                    a.hydrogens as u64,
                    a.aromatic as u64,
                    m.is_ring_atom(i) as u64,
                ],
            )
        })
        .collect()
}

/// Circular (ECFP-style) fingerprint: every environment hash up to `radius`
/// bonds sets bit `hash mod nbits`.
pub fn morgan_fingerprint(
    m: &MolGraph,
    radius: usize,
    nbits: u32,
) -> Result<Fingerprint, FingerprintError> {
    check_nbits(nbits)?;
    let mut current = atom_invariants(m);
    let mut bits: BTreeSet<u32> = current.iter().map(|h| (h % nbits as u64) as u32).collect();
    for round in 1..=radius {
        let next: Vec<u64> = (0..m.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, u64)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (m.bonds()[b].order.code(), current[j]))
                    .collect();
                env.sort_unstable();
                let words = std::iter::once(current[i])
                    .chain(env.into_iter().flat_map(|(o, h)| [o as u64, h]));
                hash_words(round as u64, words)
            })
            .collect();
        bits.extend(next.iter().map(|h| (h % nbits as u64) as u32));
        current = next;
    }
    Fingerprint::new(FingerprintKind::Morgan, nbits, bits)
}

/// Linear path fingerprint over all simple paths of 1..=`max_len` bonds.
pub fn path_fingerprint(
    m: &MolGraph,
    max_len: usize,
    nbits: u32,
) -> Result<Fingerprint, FingerprintError> {
    check_nbits(nbits)?;
    if max_len < 1 {
        return Err(FingerprintError::InvalidPathLength);
    }
    let bits = enumerate_path_strings(m, max_len)
        .into_iter()
        .map(|s| (fnv1a(s.as_bytes()) % nbits as u64) as u32);
    Fingerprint::new(FingerprintKind::Path, nbits, bits)
}

fn atom_label(m: &MolGraph, i: usize) -> String {
    let a = &m.atoms()[i];
    if a.aromatic {
        a.element().to_ascii_lowercase()
    } else {
        a.element().to_string()
    }
}

/// Direction-independent strings of every simple path with 1..=`max_len`
/// bonds, e.g. `"C-C-O"`.
pub fn enumerate_path_strings(m: &MolGraph, max_len: usize) -> BTreeSet<String> {
    let labels: Vec<String> = (0..m.atom_count()).map(|i| atom_label(m, i)).collect();
    let mut out = BTreeSet::new();
    let mut on_path = vec![false; m.atom_count()];
    let mut path: Vec<usize> = Vec::new();
    let mut orders: Vec<char> = Vec::new();
    for start in 0..m.atom_count() {
        path.push(start);
        on_path[start] = true;
        extend_paths(m, &labels, max_len, &mut path, &mut orders, &mut on_path, &mut out);
        on_path[start] = false;
        path.pop();
    }
    out
}

fn extend_paths(
    m: &MolGraph,
    labels: &[String],
    max_len: usize,
    path: &mut Vec<usize>,
    orders: &mut Vec<char>,
    on_path: &mut [bool],
    out: &mut BTreeSet<String>,
) {
    if orders.len() == max_len {
        return;
    }
    let tip = *path.last().unwrap();
    for &(next, bond) in m.neighbors(tip) {
        if on_path[next] {
            continue;
        }
        path.push(next);
        orders.push(m.bonds()[bond].order.symbol());
        on_path[next] = true;

        let forward = render_path(labels, path.iter().copied(), orders.iter().copied());
        let backward = render_path(labels, path.iter().rev().copied(), orders.iter().rev().copied());
        out.insert(forward.min(backward));
        extend_paths(m, labels, max_len, path, orders, on_path, out);

        on_path[next] = false;
        orders.pop();
        path.pop();
    }
}

fn render_path(
    labels: &[String],
    atoms: impl Iterator<Item = usize>,
    mut orders: impl Iterator<Item = char>,
) -> String {
    let mut s = String::new();
    for atom in atoms {
        s.push_str(&labels[atom]);
        if let Some(o) = orders.next() {
            s.push(o);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn fp(kind: FingerprintKind, bits: &[u32]) -> Fingerprint {
        Fingerprint::new(kind, 64, bits.iter().copied()).unwrap()
    }

    #[test]
    fn tanimoto_cases() {
        let k = FingerprintKind::Morgan;
        assert_eq!(tanimoto(&fp(k, &[1, 2]), &fp(k, &[1, 2])).unwrap(), 1.0);
        assert_eq!(tanimoto(&fp(k, &[1, 2]), &fp(k, &[3])).unwrap(), 0.0);
        assert_eq!(tanimoto(&fp(k, &[1, 2, 3]), &fp(k, &[2, 3, 4])).unwrap(), 0.5);
        assert_eq!(tanimoto(&fp(k, &[]), &fp(k, &[])).unwrap(), 1.0);
        assert_eq!(tanimoto(&fp(k, &[]), &fp(k, &[5])).unwrap(), 0.0);
        assert!(matches!(
            tanimoto(&fp(k, &[1]), &fp(FingerprintKind::Path, &[1])),
            Err(FingerprintError::Mismatch(..))
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(
            morgan_fingerprint(&m, 2, 100),
            Err(FingerprintError::InvalidBitCount(100))
        );
        assert_eq!(
            morgan_fingerprint(&m, 2, 32),
            Err(FingerprintError::InvalidBitCount(32))
        );
        assert_eq!(
            path_fingerprint(&m, 0, 2048),
            Err(FingerprintError::InvalidPathLength)
        );
        assert!(Fingerprint::new(FingerprintKind::Path, 64, [64]).is_err());
    }

    #[test]
    fn morgan_radius_zero_on_methanol() {
        let m = parse_smiles("CO").unwrap();
        let f = morgan_fingerprint(&m, 0, 2048).unwrap();
        let inv = atom_invariants(&m);
        let expected: BTreeSet<u32> = inv.iter().map(|h| (h % 2048) as u32).collect();
        assert!(f.count_ones() <= 2);
        assert_eq!(f.bits(), expected.into_iter().collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn path_strings_of_ethanol() {
        let m = parse_smiles("CCO").unwrap();
        let paths = enumerate_path_strings(&m, 2);
        let expected: BTreeSet<String> =
            ["C-C", "C-O", "C-C-O"].iter().map(|s| s.to_string()).collect();
        assert_eq!(paths, expected);
        assert!(path_fingerprint(&parse_smiles("C").unwrap(), 7, 2048)
            .unwrap()
            .bits()
            .is_empty());
    }

    #[test]
    fn ethanol_self_similarity() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 2, 2048).unwrap();
        let b = morgan_fingerprint(&parse_smiles("OCC").unwrap(), 2, 2048).unwrap();
        assert_eq!(tanimoto(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("morgan".parse::<FingerprintKind>().unwrap(), FingerprintKind::Morgan);
        assert_eq!("maccs".parse::<FingerprintKind>().unwrap(), FingerprintKind::StructuralKeys);
        assert!("ecfp".parse::<FingerprintKind>().is_err());
    }
}
