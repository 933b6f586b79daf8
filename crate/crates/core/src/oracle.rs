//! Brute-force reference matcher.
//!
//! Enumerates every assignment of document nodes to query nodes by walking
//! the document tree directly. Structural tests follow parent pointers and
//! never look at region labels.

use std::collections::HashMap;

use crate::doc::{is_ancestor, is_parent, DocTree, NodeId, RegionLabel};
use crate::query::{EdgeKind, QueryNodeId, QueryTree};
use crate::skyline::DominanceMode;

/// One match: the document node bound to each query node, `None` for an
/// absent preference node.
pub type OracleMatch = Vec<Option<NodeId>>;

/// Result enumeration stopped after this many partial matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TooManyMatches;

pub struct Oracle<'a> {
    doc: &'a DocTree,
    q: &'a QueryTree,
    by_label: HashMap<&'a str, Vec<NodeId>>,
    limit: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(doc: &'a DocTree, q: &'a QueryTree) -> Self {
        let mut by_label: HashMap<&str, Vec<NodeId>> = HashMap::new();
        for (id, n) in doc.nodes().iter().enumerate() {
            by_label.entry(n.label.as_str()).or_default().push(id);
        }
        Self { doc, q, by_label, limit: usize::MAX }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    fn is_proper_descendant(&self, x: NodeId, anc: Option<NodeId>) -> bool {
        let Some(a) = anc else { return true };
        let mut cur = self.doc.node(x).parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.doc.node(p).parent;
        }
        false
    }

    fn related(&self, x: NodeId, anc: Option<NodeId>, edge: EdgeKind) -> bool {
        match edge {
            EdgeKind::ParentChild => self.doc.node(x).parent == anc,
            EdgeKind::AncestorDescendant => self.is_proper_descendant(x, anc),
        }
    }

    /// Matches of the subtree at `qn`, given the nearest bound ancestor and
    /// the edge composed from it.
    fn subtree(&self, qn: QueryNodeId, anc: Option<NodeId>, edge: EdgeKind) -> Result<Vec<OracleMatch>, TooManyMatches> {
        let node = self.q.node(qn);
        let mut out = Vec::new();
        let candidates = self.by_label.get(node.label.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for &x in candidates {
            if !self.related(x, anc, edge) {
                continue;
            }
            let kids: Vec<_> = node.children.iter().map(|&c| (c, Some(x), self.q.node(c).edge)).collect();
            let mut partial = self.product(&kids)?;
            for m in &mut partial {
                m[qn] = Some(x);
            }
            out.extend(partial);
            if out.len() > self.limit {
                return Err(TooManyMatches);
            }
        }
        if node.is_preference {
            // absent: children hang directly off the nearest bound ancestor
            let kids: Vec<_> = node
                .children
                .iter()
                .map(|&c| {
                    let composed = match (edge, self.q.node(c).edge) {
                        (EdgeKind::ParentChild, EdgeKind::ParentChild) => EdgeKind::ParentChild,
                        _ => EdgeKind::AncestorDescendant,
                    };
                    (c, anc, composed)
                })
                .collect();
            out.extend(self.product(&kids)?);
            if out.len() > self.limit {
                return Err(TooManyMatches);
            }
        }
        Ok(out)
    }

    fn product(&self, kids: &[(QueryNodeId, Option<NodeId>, EdgeKind)]) -> Result<Vec<OracleMatch>, TooManyMatches> {
        let mut acc: Vec<OracleMatch> = vec![vec![None; self.q.len()]];
        for &(c, anc, edge) in kids {
            let sub = self.subtree(c, anc, edge)?;
            if acc.len().saturating_mul(sub.len()) > self.limit {
                return Err(TooManyMatches);
            }
            let mut next = Vec::with_capacity(acc.len() * sub.len());
            for a in &acc {
                for s in &sub {
                    let mut m = a.clone();
                    for (slot, v) in m.iter_mut().zip(s) {
                        if v.is_some() {
                            *slot = *v;
                        }
                    }
                    next.push(m);
                }
            }
            acc = next;
            if acc.is_empty() {
                break;
            }
        }
        Ok(acc)
    }

    /// All matches, sorted and deduplicated.
    pub fn matches(&self) -> Result<Vec<OracleMatch>, TooManyMatches> {
        let root = self.q.root();
        let edge = if self.q.rooted_at_document_root() { EdgeKind::ParentChild } else { EdgeKind::AncestorDescendant };
        let mut all = self.subtree(root, None, edge)?;
        all.sort();
        all.dedup();
        Ok(all)
    }
}

pub fn oracle_match(q: &QueryTree, d: &DocTree) -> Vec<OracleMatch> {
    Oracle::new(d, q).matches().expect("no limit set")
}

/// Replace node ids by their region labels.
pub fn to_regions(d: &DocTree, m: &OracleMatch) -> Vec<Option<RegionLabel>> {
    m.iter().map(|b| b.map(|n| d.node(n).region)).collect()
}

/// Matches not beaten by another match, judged by which preference nodes are
/// bound. Matches with the same comparison key stand or fall together, so
/// the pairwise check runs over distinct keys.
pub fn non_dominated(q: &QueryTree, matches: &[Vec<Option<RegionLabel>>], mode: DominanceMode) -> Vec<Vec<Option<RegionLabel>>> {
    let prefs: Vec<_> = q.preference_nodes().collect();
    let strict: Vec<_> = q.strict_nodes().collect();
    let key = |m: &Vec<Option<RegionLabel>>| {
        let fixed: Vec<Option<RegionLabel>> = match mode {
            DominanceMode::StrictFieldsEqual => strict.iter().map(|&s| m[s]).collect(),
            DominanceMode::FlagVector => Vec::new(),
        };
        let bound: Vec<bool> = prefs.iter().map(|&n| m[n].is_some()).collect();
        (fixed, bound)
    };
    let mut groups: HashMap<Vec<Option<RegionLabel>>, Vec<Vec<bool>>> = HashMap::new();
    for m in matches {
        let (fixed, bound) = key(m);
        let g = groups.entry(fixed).or_default();
        if !g.contains(&bound) {
            g.push(bound);
        }
    }
    let beats = |p: &[bool], r: &[bool]| p.iter().zip(r).all(|(a, b)| *a || !*b) && p != r;
    matches
        .iter()
        .filter(|m| {
            let (fixed, bound) = key(m);
            !groups[&fixed].iter().any(|p| beats(p, &bound))
        })
        .cloned()
        .collect()
}

/// Plain twig matching for preference-free queries by backtracking over
/// query nodes in preorder, using region predicates.
pub fn twig_matches(q: &QueryTree, d: &DocTree) -> Vec<Vec<RegionLabel>> {
    assert!(q.preference_nodes().next().is_none(), "preference-free queries only");
    fn go(q: &QueryTree, d: &DocTree, i: usize, cur: &mut Vec<RegionLabel>, out: &mut Vec<Vec<RegionLabel>>) {
        if i == q.len() {
            out.push(cur.clone());
            return;
        }
        let node = q.node(i);
        let anc = match node.parent {
            Some(p) => cur[p],
            None => d.document_region(),
        };
        let edge = match node.parent {
            Some(_) => node.edge,
            None if q.rooted_at_document_root() => EdgeKind::ParentChild,
            None => EdgeKind::AncestorDescendant,
        };
        for n in d.nodes() {
            if n.label != node.label {
                continue;
            }
            let ok = match edge {
                EdgeKind::ParentChild => is_parent(anc, n.region),
                EdgeKind::AncestorDescendant => is_ancestor(anc, n.region),
            };
            if ok {
                cur.push(n.region);
                go(q, d, i + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(q, d, 0, &mut Vec::new(), &mut out);
    out.sort();
    out
}
