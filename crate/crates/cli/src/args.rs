use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use prefq_core::DominanceMode;

#[derive(Parser, Debug)]
#[command(name = "prefq", version, about = "XML twig queries with preference nodes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an index file from an XML document.
    Index(IndexArgs),
    /// Evaluate a query against an index or a raw XML document.
    Query(QueryArgs),
    /// Show how a query is decomposed and rewritten.
    Explain(ExplainArgs),
    /// Compare the engine against the brute-force matcher on random inputs.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// XML document to index.
    pub doc: PathBuf,
    /// Where to write the index.
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// Index file or XML document.
    pub input: PathBuf,
    /// Query text, e.g. "/A[B!/C]/D/E".
    #[arg(required_unless_present = "query_file")]
    pub query: Option<String>,
    /// Read the query from a file instead.
    #[arg(long, conflicts_with = "query")]
    pub query_file: Option<PathBuf>,
    #[arg(long, default_value = "flags", value_parser = parse_mode)]
    pub dominance: DominanceMode,
    /// Also print every candidate row before filtering.
    #[arg(long)]
    pub all_candidates: bool,
    /// Leave phase timings out of the summary line.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    pub query: String,
    /// Also dump each rewritten node's occurrence list for this document.
    #[arg(long, value_name = "DOC")]
    pub lists: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "flags", value_parser = parse_mode)]
    pub dominance: DominanceMode,
    /// Largest random document, in elements.
    #[arg(long, default_value_t = 300)]
    pub max_doc_nodes: usize,
    /// Run against a deliberately broken engine.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn parse_mode(s: &str) -> Result<DominanceMode, String> {
    s.parse()
}
