//! Cheminformatics primitives for scoring generated molecules: a SMILES
//! reader, canonical SMILES, Morgan/path/structural-key fingerprints and
//! Tanimoto similarity.
//!
//! Aromaticity is kept as parsed (no kekulization) and stereochemistry is
//! dropped on input.

pub mod canon;
pub mod elements;
pub mod exec;
pub mod fingerprint;
pub mod graph;
pub mod keys;
pub mod smiles;

pub use canon::{canonical_ranks, canonical_smiles, canonicalize};
pub use exec::Exec;
pub use fingerprint::{
    morgan_fingerprint, path_fingerprint, tanimoto, Fingerprint, FingerprintError,
    FingerprintKind, DEFAULT_MORGAN_RADIUS, DEFAULT_NBITS, DEFAULT_PATH_MAX_LEN,
};
pub use graph::{Atom, Bond, BondOrder, GraphError, MolGraph};
pub use keys::{structural_keys, KeySet, KeySetError};
pub use smiles::{is_valid_smiles, parse_smiles, SmilesError, SmilesErrorKind};

/// True iff both strings parse and have equal canonical forms. An
/// unparseable prediction is never a match.
pub fn exact_match(pred: &str, gold: &str) -> bool {
    match (canonicalize(pred), canonicalize(gold)) {
        (Ok(p), Ok(g)) => p == g,
        _ => false,
    }
}

/// Default-parameter fingerprint of the given kind.
pub fn fingerprint(m: &MolGraph, kind: FingerprintKind, keys: &KeySet) -> Fingerprint {
    match kind {
        FingerprintKind::Morgan => morgan_fingerprint(m, DEFAULT_MORGAN_RADIUS, DEFAULT_NBITS)
            .expect("default parameters are valid"),
        FingerprintKind::Path => path_fingerprint(m, DEFAULT_PATH_MAX_LEN, DEFAULT_NBITS)
            .expect("default parameters are valid"),
        FingerprintKind::StructuralKeys => structural_keys(m, keys),
    }
}

/// Fingerprints a batch of molecules.
pub fn fingerprint_batch(
    mols: &[MolGraph],
    kind: FingerprintKind,
    keys: &KeySet,
    exec: Exec,
) -> Vec<Fingerprint> {
    exec.map(mols, |m| fingerprint(m, kind, keys))
}

/// Canonicalizes a batch of SMILES strings.
pub fn canonicalize_batch(smiles: &[String], exec: Exec) -> Vec<Result<String, SmilesError>> {
    exec.map(smiles, |s| canonicalize(s))
}
