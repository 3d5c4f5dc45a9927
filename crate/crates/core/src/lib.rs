//! Corpus handling, retrieval, model access, metrics and the benchmark
//! harness.

pub mod corpus;
pub mod gateway;
pub mod harness;
pub mod metrics;
pub mod retrieval;

pub use chemrag_chem::{exec, Exec};
