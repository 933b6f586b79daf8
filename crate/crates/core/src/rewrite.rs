//! Query rewriting: split a query into path-shaped subqueries and reassemble
//! them as a tree of preference path queries.

use std::fmt;

use thiserror::Error;

use crate::query::{EdgeKind, QueryNodeId, QueryTree};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("leaf number {leaf_num} out of range: parent subquery has {leaves} leaves")]
    LeafOutOfRange { leaf_num: usize, leaves: usize },
}

/// A linear path query, optionally ending in one preference step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrefPathQuery {
    pub steps: Vec<String>,
    pub last_is_preference: bool,
}

impl PrefPathQuery {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Steps with the preference step dropped.
    pub fn strict_prefix(&self) -> &[String] {
        if self.last_is_preference {
            &self.steps[..self.steps.len() - 1]
        } else {
            &self.steps
        }
    }
}

impl fmt::Display for PrefPathQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.steps.join("/"))?;
        if self.last_is_preference {
            f.write_str("!")?;
        }
        Ok(())
    }
}

pub type SubqueryId = usize;

/// A connected piece of the query whose internal edges are all parent-child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subquery {
    pub root: QueryNodeId,
    /// Members in query preorder.
    pub nodes: Vec<QueryNodeId>,
    /// Members with no children inside the subquery, left to right.
    pub leaves: Vec<QueryNodeId>,
}

impl Subquery {
    pub fn contains(&self, id: QueryNodeId) -> bool {
        self.nodes.binary_search(&id).is_ok()
    }

    pub fn render(&self, q: &QueryTree) -> String {
        q.render_filtered(self.root, &|n| self.contains(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAnnotation {
    /// 1-based index of the attachment leaf in the parent subquery.
    pub leaf_num: usize,
    /// 1-based rank of the subquery root among the attachment node's children.
    pub rel_pos: usize,
    pub rel_type: EdgeKind,
}

impl fmt::Display for EdgeAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.leaf_num, self.rel_pos, self.rel_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionNode {
    pub subquery: Subquery,
    pub parent: Option<SubqueryId>,
    pub annotation: Option<EdgeAnnotation>,
    pub children: Vec<SubqueryId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    nodes: Vec<PartitionNode>,
}

impl PartitionTree {
    pub fn nodes(&self) -> &[PartitionNode] {
        &self.nodes
    }

    pub fn node(&self, id: SubqueryId) -> &PartitionNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn render(&self, q: &QueryTree) -> String {
        let mut out = String::new();
        self.render_node(q, 0, 0, &mut out);
        out
    }

    fn render_node(&self, q: &QueryTree, id: SubqueryId, depth: usize, out: &mut String) {
        let node = &self.nodes[id];
        out.push_str(&"  ".repeat(depth));
        out.push_str(&node.subquery.render(q));
        if let Some(a) = node.annotation {
            out.push_str(&format!(" {a}"));
        }
        out.push('\n');
        for &c in &node.children {
            self.render_node(q, c, depth + 1, out);
        }
    }
}

/// Whether a node ends its subquery: preference nodes and nodes with a
/// descendant edge lose all their outgoing arcs.
fn is_cut_point(q: &QueryTree, id: QueryNodeId) -> bool {
    let node = q.node(id);
    node.is_preference || node.children.iter().any(|&c| q.node(c).edge == EdgeKind::AncestorDescendant)
}

pub fn decompose(q: &QueryTree) -> PartitionTree {
    let mut nodes = Vec::new();
    collect_subquery(q, q.root(), None, None, &mut nodes);
    PartitionTree { nodes }
}

fn collect_subquery(
    q: &QueryTree,
    root: QueryNodeId,
    parent: Option<SubqueryId>,
    annotation: Option<EdgeAnnotation>,
    out: &mut Vec<PartitionNode>,
) -> SubqueryId {
    let mut members = Vec::new();
    let mut leaves = Vec::new();
    let mut cut = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        members.push(n);
        let kids = &q.node(n).children;
        if is_cut_point(q, n) || kids.is_empty() {
            leaves.push(n);
            let leaf_num = leaves.len();
            for (i, &c) in kids.iter().enumerate() {
                cut.push((c, EdgeAnnotation { leaf_num, rel_pos: i + 1, rel_type: q.node(c).edge }));
            }
        } else {
            stack.extend(kids.iter().rev());
        }
    }
    let id = out.len();
    out.push(PartitionNode {
        subquery: Subquery { root, nodes: members, leaves },
        parent,
        annotation,
        children: Vec::new(),
    });
    for (c, a) in cut {
        let child = collect_subquery(q, c, Some(id), Some(a), out);
        out[id].children.push(child);
    }
    id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagKind {
    /// Anchored at the query root's path.
    Absolute,
    /// Starts below a preference step or a descendant edge.
    Relative,
}

pub type PrefPathId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefPathNode {
    pub tag: PrefPathQuery,
    pub kind: TagKind,
    /// Edge from the parent node (for the root: from the document).
    pub edge: EdgeKind,
    /// Query nodes covered by this node's own steps, top-down. These are the
    /// last `chain.len()` steps of the tag.
    pub chain: Vec<QueryNodeId>,
    pub parent: Option<PrefPathId>,
    pub children: Vec<PrefPathId>,
}

impl PrefPathNode {
    /// Query node bound by this node's last step.
    pub fn last(&self) -> QueryNodeId {
        *self.chain.last().expect("empty chain")
    }

    pub fn is_preference(&self) -> bool {
        self.tag.last_is_preference
    }
}

/// Rewritten query: nodes are stored in preorder, root first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefPathTree {
    nodes: Vec<PrefPathNode>,
}

impl PrefPathTree {
    pub fn nodes(&self) -> &[PrefPathNode] {
        &self.nodes
    }

    pub fn node(&self, id: PrefPathId) -> &PrefPathNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> PrefPathId {
        0
    }

    pub fn leaves(&self) -> impl Iterator<Item = PrefPathId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    /// Node covering the given query node.
    pub fn node_of(&self, q: QueryNodeId) -> Option<PrefPathId> {
        self.nodes.iter().position(|n| n.chain.contains(&q))
    }

    pub fn tags(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.tag.to_string()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(0, 0, &mut out);
        out
    }

    fn render_node(&self, id: PrefPathId, depth: usize, out: &mut String) {
        let n = &self.nodes[id];
        out.push_str(&"  ".repeat(depth));
        out.push_str(n.edge.separator());
        out.push(' ');
        out.push_str(&n.tag.to_string());
        if n.kind == TagKind::Relative {
            out.push_str(" (relative)");
        }
        out.push('\n');
        for &c in &n.children {
            self.render_node(c, depth + 1, out);
        }
    }

    /// Check the shape rules every rewriting must satisfy against its source query.
    pub fn check_well_formed(&self, q: &QueryTree) -> Result<(), String> {
        let mut seen = vec![false; q.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            if n.chain.is_empty() || n.chain.len() > n.tag.len() {
                return Err(format!("node {id}: chain of {} steps under tag {}", n.chain.len(), n.tag));
            }
            let own = &n.tag.steps[n.tag.len() - n.chain.len()..];
            for (i, (&qn, label)) in n.chain.iter().zip(own).enumerate() {
                let src = q.node(qn);
                if &src.label != label {
                    return Err(format!("node {id}: step {label} does not match query node {qn}"));
                }
                let last = i + 1 == n.chain.len();
                if src.is_preference && !last {
                    return Err(format!("node {id}: preference step {label} is not last in {}", n.tag));
                }
                if seen[qn] {
                    return Err(format!("query node {qn} covered twice"));
                }
                seen[qn] = true;
            }
            if n.tag.last_is_preference != q.node(n.last()).is_preference {
                return Err(format!("node {id}: preference marker disagrees with query"));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(format!("query node {missing} not covered"));
        }
        Ok(())
    }
}

impl fmt::Display for PrefPathTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Rewrite one subquery. `abs_path` is prepended to every tag; `kind` and
/// `edge` describe how the result hangs under its eventual parent.
pub fn rewrite_subquery(
    q: &QueryTree,
    abs_path: &[String],
    kind: TagKind,
    edge: EdgeKind,
    sub: &Subquery,
) -> PrefPathTree {
    let mut nodes = Vec::new();
    rewrite_branch(q, sub, abs_path.to_vec(), kind, edge, sub.root, None, &mut nodes);
    PrefPathTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn rewrite_branch(
    q: &QueryTree,
    sub: &Subquery,
    mut prefix: Vec<String>,
    kind: TagKind,
    edge: EdgeKind,
    start: QueryNodeId,
    parent: Option<PrefPathId>,
    out: &mut Vec<PrefPathNode>,
) {
    let kids_in = |n: QueryNodeId| -> Vec<QueryNodeId> {
        q.node(n).children.iter().copied().filter(|&c| sub.contains(c)).collect()
    };
    // walk down to the first node with several children, or to the leaf
    let mut chain = vec![start];
    let mut cur = start;
    let branch_kids = loop {
        let kids = kids_in(cur);
        match kids.len() {
            0 => break Vec::new(),
            1 => {
                cur = kids[0];
                chain.push(cur);
            }
            _ => break kids,
        }
    };
    prefix.extend(chain.iter().map(|&n| q.node(n).label.clone()));
    let id = out.len();
    out.push(PrefPathNode {
        tag: PrefPathQuery { steps: prefix.clone(), last_is_preference: q.node(cur).is_preference },
        kind,
        edge,
        chain,
        parent,
        children: Vec::new(),
    });
    if let Some(p) = parent {
        out[p].children.push(id);
    }
    for c in branch_kids {
        rewrite_branch(q, sub, prefix.clone(), kind, EdgeKind::ParentChild, c, Some(id), out);
    }
}

/// Combine per-subquery rewritings into one tree. `parts[i]` is the rewriting
/// of partition node `i`.
pub fn global_merge(p: &PartitionTree, parts: &[PrefPathTree]) -> Result<PrefPathTree, RewriteError> {
    let mut out = Vec::new();
    merge_part(p, parts, 0, None, &mut out)?;
    Ok(PrefPathTree { nodes: out })
}

fn merge_part(
    p: &PartitionTree,
    parts: &[PrefPathTree],
    part: SubqueryId,
    parent: Option<PrefPathId>,
    out: &mut Vec<PrefPathNode>,
) -> Result<(), RewriteError> {
    let frag = &parts[part];
    let leaf_count = frag.leaves().count();
    let mut attached: Vec<Vec<(usize, SubqueryId)>> = vec![Vec::new(); leaf_count];
    for &c in &p.node(part).children {
        let a = p.node(c).annotation.expect("child subquery without annotation");
        if a.leaf_num == 0 || a.leaf_num > leaf_count {
            return Err(RewriteError::LeafOutOfRange { leaf_num: a.leaf_num, leaves: leaf_count });
        }
        attached[a.leaf_num - 1].push((a.rel_pos, c));
    }
    for list in &mut attached {
        list.sort();
    }
    let mut leaf_counter = 0;
    copy_fragment(p, parts, frag, 0, parent, &attached, &mut leaf_counter, out)
}

#[allow(clippy::too_many_arguments)]
fn copy_fragment(
    p: &PartitionTree,
    parts: &[PrefPathTree],
    frag: &PrefPathTree,
    at: PrefPathId,
    parent: Option<PrefPathId>,
    attached: &[Vec<(usize, SubqueryId)>],
    leaf_counter: &mut usize,
    out: &mut Vec<PrefPathNode>,
) -> Result<(), RewriteError> {
    let src = &frag.nodes[at];
    let id = out.len();
    out.push(PrefPathNode { parent, children: Vec::new(), ..src.clone() });
    if let Some(par) = parent {
        out[par].children.push(id);
    }
    if src.children.is_empty() {
        let leaf = *leaf_counter;
        *leaf_counter += 1;
        for &(_, c) in &attached[leaf] {
            merge_part(p, parts, c, Some(id), out)?;
        }
    } else {
        for &c in &src.children {
            copy_fragment(p, parts, frag, c, Some(id), attached, leaf_counter, out)?;
        }
    }
    Ok(())
}

/// Full rewriting pipeline.
pub fn rewrite(q: &QueryTree) -> Result<PrefPathTree, RewriteError> {
    let partition = decompose(q);
    rewrite_partition(q, &partition)
}

pub fn rewrite_partition(q: &QueryTree, partition: &PartitionTree) -> Result<PrefPathTree, RewriteError> {
    let mut parts: Vec<Option<PrefPathTree>> = vec![None; partition.len()];
    // parents are created before their children, so index order is top-down
    for id in 0..partition.len() {
        let node = partition.node(id);
        let (prefix, kind, edge) = match (node.parent, node.annotation) {
            (Some(par), Some(a)) => {
                let frag = parts[par].as_ref().expect("parent rewritten first");
                let leaves: Vec<_> = frag.leaves().collect();
                let &leaf = leaves
                    .get(a.leaf_num.wrapping_sub(1))
                    .ok_or(RewriteError::LeafOutOfRange { leaf_num: a.leaf_num, leaves: leaves.len() })?;
                let leaf = frag.node(leaf);
                if a.rel_type == EdgeKind::ParentChild && !leaf.is_preference() {
                    (leaf.tag.steps.clone(), leaf.kind, a.rel_type)
                } else {
                    (Vec::new(), TagKind::Relative, a.rel_type)
                }
            }
            _ => {
                let edge = if q.rooted_at_document_root() {
                    EdgeKind::ParentChild
                } else {
                    EdgeKind::AncestorDescendant
                };
                (Vec::new(), TagKind::Absolute, edge)
            }
        };
        parts[id] = Some(rewrite_subquery(q, &prefix, kind, edge, &node.subquery));
    }
    let parts: Vec<_> = parts.into_iter().map(|p| p.expect("all parts rewritten")).collect();
    global_merge(partition, &parts)
}
