//! Randomized equivalence testing of the engine against the oracle.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataguide::AnnotatedDataGuide;
use crate::doc::{DocTree, Element, RegionLabel};
use crate::engine::evaluate;
use crate::oracle::{non_dominated, to_regions, Oracle};
use crate::query::QueryTree;
use crate::skyline::DominanceMode;

const LABELS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub max_doc_nodes: usize,
    pub max_depth: usize,
    pub max_roots: usize,
    pub alphabet: usize,
    pub max_query_nodes: usize,
    pub max_preference: usize,
    pub max_descendant_edges: usize,
    /// Oracle enumerations larger than this are skipped.
    pub oracle_limit: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_doc_nodes: 300,
            max_depth: 8,
            max_roots: 3,
            alphabet: 6,
            max_query_nodes: 8,
            max_preference: 2,
            max_descendant_edges: 2,
            oracle_limit: 50_000,
        }
    }
}

/// Random forest of at most `max_doc_nodes` elements.
pub fn random_doc(rng: &mut impl Rng, cfg: &GenConfig, alphabet: usize) -> Vec<Element> {
    let n = rng.gen_range(1..=cfg.max_doc_nodes);
    let roots = rng.gen_range(1..=cfg.max_roots.min(n));
    // (label, parent, depth)
    let mut nodes: Vec<(usize, Option<usize>, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let label = rng.gen_range(0..alphabet);
        if i < roots {
            nodes.push((label, None, 1));
            continue;
        }
        loop {
            let p = rng.gen_range(0..nodes.len());
            if nodes[p].2 < cfg.max_depth {
                nodes.push((label, Some(p), nodes[p].2 + 1));
                break;
            }
        }
    }
    fn build(i: usize, nodes: &[(usize, Option<usize>, usize)], kids: &[Vec<usize>]) -> Element {
        Element::new(LABELS[nodes[i].0], kids[i].iter().map(|&c| build(c, nodes, kids)).collect())
    }
    let mut kids = vec![Vec::new(); n];
    for (i, &(_, p, _)) in nodes.iter().enumerate() {
        if let Some(p) = p {
            kids[p].push(i);
        }
    }
    (0..roots).map(|r| build(r, &nodes, &kids)).collect()
}

/// Random query text of at most `max_query_nodes` steps.
pub fn random_query(rng: &mut impl Rng, cfg: &GenConfig, alphabet: usize) -> String {
    let n = rng.gen_range(1..=cfg.max_query_nodes);
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        kids[p].push(i);
    }
    let labels: Vec<&str> = (0..n).map(|_| LABELS[rng.gen_range(0..alphabet)]).collect();
    let mut pref = vec![false; n];
    let mut candidates: Vec<usize> = (1..n).collect();
    if rng.gen_bool(0.05) || n == 1 {
        candidates.push(0);
    }
    candidates.shuffle(rng);
    for &c in candidates.iter().take(rng.gen_range(0..=cfg.max_preference)) {
        pref[c] = true;
    }
    let mut desc = vec![false; n];
    let mut edges: Vec<usize> = (1..n).collect();
    edges.shuffle(rng);
    for &c in edges.iter().take(rng.gen_range(0..=cfg.max_descendant_edges)) {
        desc[c] = true;
    }
    fn render(i: usize, labels: &[&str], pref: &[bool], desc: &[bool], kids: &[Vec<usize>]) -> String {
        let mut s = labels[i].to_string();
        if pref[i] {
            s.push('!');
        }
        if let Some((&last, preds)) = kids[i].split_last() {
            for &p in preds {
                s.push('[');
                if desc[p] {
                    s.push_str("//");
                }
                s.push_str(&render(p, labels, pref, desc, kids));
                s.push(']');
            }
            s.push_str(if desc[last] { "//" } else { "/" });
            s.push_str(&render(last, labels, pref, desc, kids));
        }
        s
    }
    let body = render(0, &labels, &pref, &desc, &kids);
    if rng.gen_bool(0.3) {
        format!("/{body}")
    } else {
        body
    }
}

pub type Rows = Vec<Vec<Option<RegionLabel>>>;

/// Candidate and answer rows of one evaluation, as bindings per query node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineRows {
    pub candidates: Rows,
    pub answers: Rows,
}

pub type Engine = dyn Fn(&DocTree, &QueryTree, DominanceMode) -> Result<EngineRows, String>;

pub fn engine_rows(doc: &DocTree, q: &QueryTree, mode: DominanceMode) -> Result<EngineRows, String> {
    let dg = AnnotatedDataGuide::build(doc);
    let out = evaluate(&dg, q, mode).map_err(|e| e.to_string())?;
    let mut candidates: Rows = out.table.rows.iter().map(|r| out.table.assignment(r)).collect();
    let mut answers: Rows = out.answers.iter().map(|r| out.table.assignment(r)).collect();
    candidates.sort();
    answers.sort();
    Ok(EngineRows { candidates, answers })
}

/// A deliberately wrong engine that skips the skyline step, used to check
/// that the harness notices.
pub fn faulty_engine_rows(doc: &DocTree, q: &QueryTree, mode: DominanceMode) -> Result<EngineRows, String> {
    let mut rows = engine_rows(doc, q, mode)?;
    rows.answers = rows.candidates.clone();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Agree,
    /// The oracle enumeration exceeded its limit.
    Skipped,
    Disagree(String),
}

pub fn compare(engine: &Engine, doc: &DocTree, q: &QueryTree, mode: DominanceMode, limit: usize) -> Verdict {
    let expected = match Oracle::new(doc, q).with_limit(limit).matches() {
        Ok(m) => m,
        Err(_) => return Verdict::Skipped,
    };
    let mut candidates: Rows = expected.iter().map(|m| to_regions(doc, m)).collect();
    candidates.sort();
    let mut answers = non_dominated(q, &candidates, mode);
    answers.sort();
    let got = match engine(doc, q, mode) {
        Ok(g) => g,
        Err(e) => return Verdict::Disagree(format!("engine error: {e}")),
    };
    if got.candidates != candidates {
        let want: HashSet<_> = candidates.iter().collect();
        let have: HashSet<_> = got.candidates.iter().collect();
        let missing = want.difference(&have).count();
        let extra = have.difference(&want).count();
        return Verdict::Disagree(format!("candidates differ: {missing} missing, {extra} unexpected"));
    }
    if got.answers != answers {
        return Verdict::Disagree(format!("answers differ: expected {}, got {}", answers.len(), got.answers.len()));
    }
    Verdict::Agree
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub document: String,
    pub query: String,
    pub reason: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trial {}: {}\n  query: {}\n  document: {}", self.trial, self.reason, self.query, self.document)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub trials: usize,
    pub skipped: usize,
    pub failure: Option<Counterexample>,
}

fn remove_nth(forest: &[Element], n: usize, splice: bool) -> Vec<Element> {
    fn walk(els: &[Element], n: &mut usize, splice: bool, out: &mut Vec<Element>) {
        for e in els {
            if *n == 0 {
                *n = usize::MAX;
                if splice {
                    out.extend(e.children.iter().cloned());
                }
                continue;
            }
            if *n != usize::MAX {
                *n -= 1;
            }
            let mut kids = Vec::new();
            walk(&e.children, n, splice, &mut kids);
            out.push(Element::new(e.label.clone(), kids));
        }
    }
    let mut out = Vec::new();
    let mut n = n;
    walk(forest, &mut n, splice, &mut out);
    out
}

fn without_leaf(q: &QueryTree, leaf: usize) -> Option<QueryTree> {
    let body = q.render_filtered(q.root(), &|n| n != leaf);
    let text = if q.rooted_at_document_root() { format!("/{body}") } else { body };
    QueryTree::parse(&text).ok()
}

/// Shrink a failing document and query while the disagreement persists.
pub fn minimize(
    engine: &Engine,
    mut forest: Vec<Element>,
    mut q: QueryTree,
    mode: DominanceMode,
    limit: usize,
) -> (Vec<Element>, QueryTree, String) {
    let fails = |f: &[Element], q: &QueryTree| -> Option<String> {
        if f.is_empty() {
            return None;
        }
        match compare(engine, &DocTree::from_forest(f), q, mode, limit) {
            Verdict::Disagree(r) => Some(r),
            _ => None,
        }
    };
    let mut reason = fails(&forest, &q).unwrap_or_default();
    loop {
        let mut changed = false;
        for leaf in (1..q.len()).rev() {
            if !q.is_leaf(leaf) {
                continue;
            }
            if let Some(smaller) = without_leaf(&q, leaf) {
                if let Some(r) = fails(&forest, &smaller) {
                    q = smaller;
                    reason = r;
                    changed = true;
                    break;
                }
            }
        }
        let size: usize = forest.iter().map(Element::size).sum();
        'doc: for n in (0..size).rev() {
            for splice in [false, true] {
                let smaller = remove_nth(&forest, n, splice);
                if let Some(r) = fails(&smaller, &q) {
                    forest = smaller;
                    reason = r;
                    changed = true;
                    break 'doc;
                }
            }
        }
        if !changed {
            return (forest, q, reason);
        }
    }
}

/// Run `trials` compared trials (oracle-skipped ones are not counted) and
/// stop at the first disagreement, which is minimized.
pub fn run_selftest(engine: &Engine, seed: u64, trials: usize, mode: DominanceMode, cfg: &GenConfig) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut skipped = 0;
    while done < trials {
        let alphabet = rng.gen_range(2..=cfg.alphabet);
        let forest = random_doc(&mut rng, cfg, alphabet);
        let text = random_query(&mut rng, cfg, alphabet);
        let q = QueryTree::parse(&text).expect("generated query parses");
        let doc = DocTree::from_forest(&forest);
        match compare(engine, &doc, &q, mode, cfg.oracle_limit) {
            Verdict::Agree => done += 1,
            Verdict::Skipped => skipped += 1,
            Verdict::Disagree(_) => {
                log::info!("trial {done} disagrees on {text}; minimizing");
                let (forest, q, reason) = minimize(engine, forest, q, mode, cfg.oracle_limit);
                return SelftestReport {
                    seed,
                    trials: done + 1,
                    skipped,
                    failure: Some(Counterexample {
                        trial: done,
                        document: DocTree::from_forest(&forest).to_xml(),
                        query: q.to_string(),
                        reason,
                    }),
                };
            }
        }
    }
    SelftestReport { seed, trials: done, skipped, failure: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_bounds() {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let forest = random_doc(&mut rng, &cfg, 4);
            let doc = DocTree::from_forest(&forest);
            assert!(doc.len() <= cfg.max_doc_nodes);
            assert!(doc.nodes().iter().all(|n| n.region.level as usize <= cfg.max_depth));
            let q = QueryTree::parse(&random_query(&mut rng, &cfg, 4)).unwrap();
            assert!(q.len() <= cfg.max_query_nodes);
            assert!(q.preference_nodes().count() <= cfg.max_preference);
            assert!(q.nodes().iter().skip(1).filter(|n| n.edge == crate::query::EdgeKind::AncestorDescendant).count() <= 2);
        }
    }

    #[test]
    fn remove_and_splice() {
        let f = vec![Element::new("A", vec![Element::new("B", vec![Element::leaf("C")]), Element::leaf("D")])];
        let xml = |f: &[Element]| DocTree::from_forest(f).to_xml();
        assert_eq!(xml(&remove_nth(&f, 1, false)), "<A><D/></A>");
        assert_eq!(xml(&remove_nth(&f, 1, true)), "<A><C/><D/></A>");
        assert_eq!(xml(&remove_nth(&f, 3, false)), "<A><B><C/></B></A>");
    }

    #[test]
    fn engine_agrees_on_a_few_trials() {
        let cfg = GenConfig { max_doc_nodes: 60, ..GenConfig::default() };
        let report = run_selftest(&engine_rows, 11, 150, DominanceMode::FlagVector, &cfg);
        assert_eq!(report.failure, None);
        let report = run_selftest(&engine_rows, 12, 100, DominanceMode::StrictFieldsEqual, &cfg);
        assert_eq!(report.failure, None);
    }

    #[test]
    fn harness_catches_faulty_engine() {
        let cfg = GenConfig { max_doc_nodes: 40, ..GenConfig::default() };
        let report = run_selftest(&faulty_engine_rows, 3, 500, DominanceMode::FlagVector, &cfg);
        let failure = report.failure.expect("fault detected");
        assert!(failure.reason.starts_with("answers differ"), "{failure}");
        // minimized down to a handful of nodes
        assert!(failure.document.matches('<').count() <= 8, "{failure}");
    }
}
