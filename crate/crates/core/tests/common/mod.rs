#![allow(dead_code)]

use std::path::PathBuf;

use chemrag_core::corpus::{ingest_source, read_raw_documents, ChunkParams, Snippet};
use chemrag_core::gateway::{hash32, GatewayError};
use chemrag_core::retrieval::Embedder;
use chemrag_core::Exec;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

/// The 1k-document fixture corpus, chunked with default parameters.
pub fn fixture_snippets() -> Vec<Snippet> {
    let records = read_raw_documents(&fixtures_dir().join("corpus.jsonl"), None).unwrap();
    ingest_source(records, &ChunkParams::default(), Exec::Sequential).unwrap().0
}

/// First `n` fixture snippets in id order.
pub fn sample_snippets(n: usize) -> Vec<Snippet> {
    let mut s = fixture_snippets();
    s.sort_by(|a, b| a.id.cmp(&b.id));
    s.truncate(n);
    s
}

pub const QUERIES: [&str; 20] = [
    "ethanol boiling point",
    "CCO",
    "benzene aromatic ring",
    "c1ccccc1",
    "Suzuki coupling palladium catalyst",
    "acid dissociation constant pKa",
    "ideal gas law pressure volume",
    "oxidation state of manganese",
    "enzyme inhibition kinetics",
    "polymer synthesis monomer",
    "reaction yield solvent temperature",
    "toxicity in cell culture",
    "hydrogen bonding water",
    "NaCl solubility",
    "molecular weight 46.07",
    "entropy enthalpy Gibbs free energy",
    "chlorine electronegativity",
    "nucleophilic substitution SN2",
    "crystal structure lattice",
    "photodegradation of aspirin",
];

/// Offline embedder backed by the seeded hash stub.
pub struct HashEmbedder {
    pub name: String,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(name: &str, seed: u64) -> Self {
        HashEmbedder { name: name.into(), seed }
    }
}

impl Embedder for HashEmbedder {
    fn profile(&self) -> &str {
        &self.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        Ok(texts.iter().map(|t| hash32(t, self.seed)).collect())
    }
}

/// Score descending, then id ascending.
pub fn sort_ranked(v: &mut [(String, f64)]) {
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}
