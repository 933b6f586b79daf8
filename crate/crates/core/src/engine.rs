//! End-to-end query evaluation: rewrite, build lists, match, filter.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dataguide::AnnotatedDataGuide;
use crate::holistic::{holistic_match, CandidateRow, MatchStats, PreferenceTable};
use crate::prefpath::{assign_lists_for, OccurrenceList};
use crate::query::QueryTree;
use crate::rewrite::{rewrite, PrefPathTree, RewriteError};
use crate::skyline::{skyline_filter, DominanceMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Timings {
    pub rewrite: Duration,
    pub list_build: Duration,
    #[serde(rename = "match")]
    pub matching: Duration,
    pub skyline: Duration,
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub tree: PrefPathTree,
    pub lists: Vec<OccurrenceList>,
    pub table: PreferenceTable,
    pub answers: Vec<CandidateRow>,
    pub stats: MatchStats,
    pub timings: Timings,
}

pub fn evaluate(dg: &AnnotatedDataGuide, q: &QueryTree, mode: DominanceMode) -> Result<QueryOutcome, RewriteError> {
    let t0 = Instant::now();
    let tree = rewrite(q)?;
    let t1 = Instant::now();
    let lists = assign_lists_for(dg, &tree, q);
    let t2 = Instant::now();
    let (table, stats) = holistic_match(dg, q, &tree, &lists);
    let t3 = Instant::now();
    let answers = skyline_filter(&table, mode);
    let t4 = Instant::now();
    log::debug!(
        "query {q}: {} candidates, {} answers, {} advances over {} entries",
        table.len(),
        answers.len(),
        stats.advances,
        stats.list_entries
    );
    Ok(QueryOutcome {
        tree,
        lists,
        table,
        answers,
        stats,
        timings: Timings { rewrite: t1 - t0, list_build: t2 - t1, matching: t3 - t2, skyline: t4 - t3 },
    })
}
