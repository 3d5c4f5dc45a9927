//! `chemrag` command-line interface.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 when
//! a run fails at runtime. Data goes to stdout, diagnostics to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "chemrag", version, about = "Chemistry RAG toolkit and benchmark harness")]
pub struct Cli {
    /// Run configuration file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Response cache directory; overrides the config's cache_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Log progress and retries to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chunk a JSONL document file into a snippet store.
    Ingest {
        /// Input JSONL: documents or PubChem compound records.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Output snippet store directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Force every record's source (pubchem, pubmed, uspto, semantic_scholar, openstax, wikipedia).
        #[arg(long)]
        source: Option<String>,
        /// Largest snippet size in whitespace tokens (at least 32).
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
    },
    /// Build retrieval indices.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Search one or more indices; several are fused with reciprocal rank fusion.
    Retrieve {
        /// Index directory; repeat to fuse.
        #[arg(long = "index", value_name = "DIR", required = true)]
        indices: Vec<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Snippet store; defaults to the corpus recorded in the index header.
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        profiles: ProfileArgs,
    },
    /// Run the benchmark described by --config.
    Run,
    /// Run the benchmark once per k and write sweep.csv.
    Sweep {
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10, 15])]
        ks: Vec<usize>,
    },
    /// Source distribution of the top retrieved snippets per task.
    Proportions {
        /// Run directory; defaults to the run named by --config.
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        top_n: usize,
    },
    /// Score one prediction, or re-score a finished run from its stored responses.
    Score {
        /// Question kind: multi_choice, numeric, open_text, open_molecule, property_numeric.
        #[arg(long, required_unless_present = "run", requires_all = ["pred", "gold"])]
        kind: Option<String>,
        #[arg(long, requires = "kind")]
        pred: Option<String>,
        #[arg(long, requires = "kind")]
        gold: Option<String>,
        /// Run directory to re-score.
        #[arg(long, value_name = "DIR", conflicts_with = "kind")]
        run: Option<PathBuf>,
    },
    /// Molecule utilities.
    #[command(subcommand)]
    Mol(MolCommand),
}

#[derive(Subcommand, Debug)]
pub enum IndexCommand {
    /// Build a lexical (BM25) or dense index over a snippet store.
    Build {
        /// Snippet store directory.
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// lexical or dense.
        #[arg(long)]
        kind: String,
        /// Embedding profile for dense indices.
        #[arg(long)]
        embedder: Option<String>,
        /// Output index directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[command(flatten)]
        profiles: ProfileArgs,
    },
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// Profile registry file merged over the built-in profiles.
    #[arg(long, value_name = "FILE")]
    pub profiles: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum MolCommand {
    /// Print "valid" if the SMILES parses.
    Validate { smiles: String },
    /// Print the canonical SMILES.
    Canon { smiles: String },
    /// Print the Tanimoto similarity of two molecules.
    Sim {
        a: String,
        b: String,
        /// morgan, path or structural_keys.
        #[arg(long, default_value = "morgan")]
        kind: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
