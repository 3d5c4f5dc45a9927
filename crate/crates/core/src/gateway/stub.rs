//! Offline stand-ins for a chat model and an embedding model.

use sha2::{Digest, Sha256};

use super::{ChatMessage, Role};

pub const HASH32_DIM: usize = 32;

/// The last user message, verbatim.
pub fn echo(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.clone())
        .unwrap_or_default()
}

/// Sum of seeded per-token SHA-256 vectors over the sorted lowercase token
/// multiset, scaled to unit length. Text without tokens maps to zeros.
pub fn hash32(text: &str, seed: u64) -> Vec<f32> {
    let mut tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    tokens.sort_unstable();
    let mut acc = [0f64; HASH32_DIM];
    for t in &tokens {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(t.as_bytes());
        for (a, b) in acc.iter_mut().zip(h.finalize()) {
            *a += (b as f64 - 127.5) / 127.5;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; HASH32_DIM];
    }
    acc.iter().map(|x| (x / norm) as f32).collect()
}
