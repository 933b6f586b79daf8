mod args;

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use prefq_core::dataguide::INDEX_MAGIC;
use prefq_core::prefpath::{assign_lists_for, describe_lists};
use prefq_core::selftest::{engine_rows, faulty_engine_rows, run_selftest, GenConfig};
use prefq_core::{
    decompose, evaluate, rewrite, AnnotatedDataGuide, CandidateRow, DocTree, PreferenceTable, QueryTree, RegionLabel,
};
use serde::Serialize;

use args::{Cli, Command, ExplainArgs, IndexArgs, QueryArgs, SelftestArgs};

enum CliError {
    /// Unreadable file or malformed document/index.
    Input { path: PathBuf, message: String },
    Query(String),
    Internal(String),
    /// Selftest found a disagreement; the report is already printed.
    Counterexample,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Query(_) => 3,
            CliError::Internal(_) => 4,
            CliError::Counterexample => 1,
        }
    }

    fn input(path: &Path, message: impl fmt::Display) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Query(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Counterexample => f.write_str("selftest found a counterexample"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Internal(format!("write failed: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PREFQ_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Query(a) => cmd_query(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Counterexample) {
                eprintln!("prefq: {e}");
            }
            ExitCode::from(e.code())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn parse_doc(path: &Path) -> Result<DocTree> {
    DocTree::parse(&read(path)?).map_err(|e| CliError::input(path, e))
}

/// Load a saved index, or index a raw document on the fly.
fn load_input(path: &Path) -> Result<AnnotatedDataGuide> {
    let text = read(path)?;
    if text.starts_with(INDEX_MAGIC) {
        AnnotatedDataGuide::load_index(&text).map_err(|e| CliError::input(path, e))
    } else {
        let doc = DocTree::parse(&text).map_err(|e| CliError::input(path, e))?;
        Ok(AnnotatedDataGuide::build(&doc))
    }
}

fn parse_query(text: &str) -> Result<QueryTree> {
    let q = QueryTree::parse(text.trim()).map_err(|e| {
        let caret = format!("{}^", " ".repeat(e.position));
        CliError::Query(format!("{e}\n  {}\n  {caret}", text.trim()))
    })?;
    for w in q.validate() {
        log::warn!("{w}");
    }
    Ok(q)
}

fn emit(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| CliError::Internal(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    output: &'a str,
    nodes: usize,
    paths: usize,
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let doc = parse_doc(&a.doc)?;
    let dg = AnnotatedDataGuide::build(&doc);
    fs::write(&a.out, dg.save_index()).map_err(|e| CliError::input(&a.out, e))?;
    let out = a.out.display().to_string();
    emit(&mut io::stdout().lock(), &IndexSummary { output: &out, nodes: dg.node_count(), paths: dg.key_count() })
}

#[derive(Serialize)]
struct PhaseMillis {
    rewrite: f64,
    list_build: f64,
    #[serde(rename = "match")]
    matching: f64,
    skyline: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Serialize)]
struct Summary<'a> {
    query: String,
    mode: String,
    candidates: usize,
    answers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<PhaseMillis>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    warnings: &'a [String],
}

#[derive(Serialize)]
struct Binding<'a> {
    node: usize,
    label: &'a str,
    region: Option<RegionLabel>,
}

#[derive(Serialize)]
struct RowLine<'a> {
    kind: &'static str,
    index: usize,
    bindings: Vec<Binding<'a>>,
    flags: &'a [bool],
}

fn row_line<'a>(kind: &'static str, index: usize, q: &'a QueryTree, t: &PreferenceTable, row: &'a CandidateRow) -> RowLine<'a> {
    let bindings = t
        .assignment(row)
        .into_iter()
        .enumerate()
        .map(|(node, region)| Binding { node, label: &q.node(node).label, region })
        .collect();
    RowLine { kind, index, bindings, flags: &row.pref_flags }
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let text = match (&a.query, &a.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => read(path)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let q = parse_query(&text)?;
    let dg = load_input(&a.input)?;
    let out = evaluate(&dg, &q, a.dominance).map_err(|e| CliError::Internal(e.to_string()))?;
    let warnings: Vec<String> = q.validate().iter().map(|w| w.to_string()).collect();
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let timings = (!a.no_timings).then(|| PhaseMillis {
        rewrite: ms(out.timings.rewrite),
        list_build: ms(out.timings.list_build),
        matching: ms(out.timings.matching),
        skyline: ms(out.timings.skyline),
    });
    emit(
        &mut w,
        &Summary {
            query: q.to_string(),
            mode: a.dominance.to_string(),
            candidates: out.table.len(),
            answers: out.answers.len(),
            timings,
            warnings: &warnings,
        },
    )?;
    if a.all_candidates {
        for (i, row) in out.table.rows.iter().enumerate() {
            emit(&mut w, &row_line("candidate", i, &q, &out.table, row))?;
        }
    }
    for (i, row) in out.answers.iter().enumerate() {
        emit(&mut w, &row_line("answer", i, &q, &out.table, row))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> Result<()> {
    let q = parse_query(&a.query)?;
    let partition = decompose(&q);
    let tree = rewrite(&q).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut w = io::stdout().lock();
    writeln!(w, "query: {q}")?;
    writeln!(w, "partition:")?;
    for line in partition.render(&q).lines() {
        writeln!(w, "  {line}")?;
    }
    writeln!(w, "rewritten:")?;
    for line in tree.render().lines() {
        writeln!(w, "  {line}")?;
    }
    if let Some(path) = &a.lists {
        let dg = load_input(path)?;
        let lists = assign_lists_for(&dg, &tree, &q);
        writeln!(w, "lists:")?;
        for line in describe_lists(&tree, &lists).lines() {
            writeln!(w, "  {line}")?;
        }
    }
    Ok(())
}

fn cmd_selftest(a: SelftestArgs) -> Result<()> {
    let cfg = GenConfig { max_doc_nodes: a.max_doc_nodes.max(1), ..GenConfig::default() };
    let report = if a.inject_fault {
        run_selftest(&faulty_engine_rows, a.seed, a.trials, a.dominance, &cfg)
    } else {
        run_selftest(&engine_rows, a.seed, a.trials, a.dominance, &cfg)
    };
    emit(&mut io::stdout().lock(), &report)?;
    match &report.failure {
        None => Ok(()),
        Some(c) => {
            eprintln!("{c}");
            Err(CliError::Counterexample)
        }
    }
}
