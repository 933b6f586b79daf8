//! Twig query dialect with preference nodes.
//!
//! ```text
//! query := '/'? step tail
//! tail  := (('/' | '//') step)*
//! step  := label '!'? pred*
//! pred  := '[' ('/' | '//')? step tail ']'
//! ```
//!
//! Predicates become the first children of their step, in order; the path
//! that continues after the step becomes its last child.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    ParentChild,
    AncestorDescendant,
}

impl EdgeKind {
    pub fn separator(self) -> &'static str {
        match self {
            EdgeKind::ParentChild => "/",
            EdgeKind::AncestorDescendant => "//",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::ParentChild => "ParentChild",
            EdgeKind::AncestorDescendant => "AncestorDescendant",
        })
    }
}

/// Position of a node in its query, in preorder.
pub type QueryNodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryNode {
    pub label: String,
    pub is_preference: bool,
    pub parent: Option<QueryNodeId>,
    /// Edge from the parent; `ParentChild` for the root.
    pub edge: EdgeKind,
    pub children: Vec<QueryNodeId>,
}

/// A parsed query. Nodes are stored in preorder, so the root is node 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTree {
    nodes: Vec<QueryNode>,
    rooted_at_document_root: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("query parse error at position {position}: {message}")]
pub struct QueryParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryWarning {
    /// The root is a preference node, so it constrains nothing.
    PreferenceRoot,
    /// A preference node lies below another preference node.
    NestedPreference { node: QueryNodeId, ancestor: QueryNodeId },
}

impl fmt::Display for QueryWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryWarning::PreferenceRoot => write!(f, "root is a preference node"),
            QueryWarning::NestedPreference { node, ancestor } => {
                write!(f, "nested preference: node {node} is below preference node {ancestor}")
            }
        }
    }
}

impl QueryTree {
    pub fn parse(text: &str) -> Result<Self, QueryParseError> {
        Parser::new(text).parse()
    }

    /// Build a tree from `(label, is_preference, edge, parent)` rows already in preorder.
    pub fn from_nodes(nodes: Vec<QueryNode>, rooted_at_document_root: bool) -> Self {
        assert!(!nodes.is_empty(), "query needs a root");
        Self { nodes, rooted_at_document_root }
    }

    pub fn nodes(&self) -> &[QueryNode] {
        &self.nodes
    }

    pub fn node(&self, id: QueryNodeId) -> &QueryNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> QueryNodeId {
        0
    }

    pub fn rooted_at_document_root(&self) -> bool {
        self.rooted_at_document_root
    }

    pub fn preference_nodes(&self) -> impl Iterator<Item = QueryNodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_preference)
    }

    pub fn strict_nodes(&self) -> impl Iterator<Item = QueryNodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_preference)
    }

    pub fn is_leaf(&self, id: QueryNodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn has_descendant_edge(&self) -> bool {
        self.nodes.iter().skip(1).any(|n| n.edge == EdgeKind::AncestorDescendant)
    }

    pub fn validate(&self) -> Vec<QueryWarning> {
        let mut warnings = Vec::new();
        if self.nodes[0].is_preference {
            warnings.push(QueryWarning::PreferenceRoot);
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if !node.is_preference {
                continue;
            }
            let mut cur = node.parent;
            while let Some(a) = cur {
                if self.nodes[a].is_preference {
                    warnings.push(QueryWarning::NestedPreference { node: id, ancestor: a });
                    break;
                }
                cur = self.nodes[a].parent;
            }
        }
        warnings
    }

    /// Render the subtree at `id` (without the leading anchor).
    pub fn render_subtree(&self, id: QueryNodeId) -> String {
        self.render_filtered(id, &|_| true)
    }

    /// Render the subtree at `id`, keeping only nodes accepted by `keep`.
    pub fn render_filtered(&self, id: QueryNodeId, keep: &dyn Fn(QueryNodeId) -> bool) -> String {
        let node = &self.nodes[id];
        let mut out = node.label.clone();
        if node.is_preference {
            out.push('!');
        }
        let kids: Vec<_> = node.children.iter().copied().filter(|&c| keep(c)).collect();
        if let Some((&last, preds)) = kids.split_last() {
            for &p in preds {
                out.push('[');
                if self.nodes[p].edge == EdgeKind::AncestorDescendant {
                    out.push_str("//");
                }
                out.push_str(&self.render_filtered(p, keep));
                out.push(']');
            }
            out.push_str(self.nodes[last].edge.separator());
            out.push_str(&self.render_filtered(last, keep));
        }
        out
    }
}

impl fmt::Display for QueryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rooted_at_document_root {
            f.write_str("/")?;
        }
        f.write_str(&self.render_subtree(0))
    }
}

fn is_label_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
    nodes: Vec<QueryNode>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.char_indices().filter(|(_, c)| !c.is_whitespace()).collect(),
            pos: 0,
            text,
            nodes: Vec::new(),
        }
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|&(i, _)| i).unwrap_or(self.text.len())
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, QueryParseError> {
        Err(QueryParseError { position: self.offset(), message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).map(|&(_, c)| c)
    }

    fn parse(mut self) -> Result<QueryTree, QueryParseError> {
        if self.chars.is_empty() {
            return self.error("empty query");
        }
        let rooted = match (self.peek(), self.peek2()) {
            (Some('/'), Some('/')) => return self.error("query may not start with '//'"),
            (Some('/'), _) => {
                self.pos += 1;
                true
            }
            _ => false,
        };
        self.path(None, EdgeKind::ParentChild)?;
        match self.peek() {
            None => {}
            Some(']') => return self.error("unbalanced ']'"),
            Some('!') => return self.error("'!' must directly follow a label"),
            Some(c) => return self.error(format!("unexpected '{c}'")),
        }
        // children were appended in parse order; renumber into preorder
        Ok(QueryTree { nodes: preorder(self.nodes), rooted_at_document_root: rooted })
    }

    /// step tail; returns the id of the first step.
    fn path(&mut self, parent: Option<QueryNodeId>, edge: EdgeKind) -> Result<QueryNodeId, QueryParseError> {
        let first = self.step(parent, edge)?;
        let mut last = first;
        loop {
            let edge = match (self.peek(), self.peek2()) {
                (Some('/'), Some('/')) => {
                    self.pos += 2;
                    EdgeKind::AncestorDescendant
                }
                (Some('/'), _) => {
                    self.pos += 1;
                    EdgeKind::ParentChild
                }
                _ => break,
            };
            last = self.step(Some(last), edge)?;
        }
        Ok(first)
    }

    fn step(&mut self, parent: Option<QueryNodeId>, edge: EdgeKind) -> Result<QueryNodeId, QueryParseError> {
        let start = self.pos;
        while self.peek().is_some_and(is_label_char) {
            self.pos += 1;
        }
        if self.pos == start {
            return match self.peek() {
                Some('!') => self.error("'!' must directly follow a label"),
                Some('/') | Some('[') | Some(']') | None => self.error("empty step"),
                Some(c) => self.error(format!("invalid character '{c}' in label")),
            };
        }
        let label: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        let is_preference = if self.peek() == Some('!') {
            self.pos += 1;
            true
        } else {
            false
        };
        let id = self.nodes.len();
        self.nodes.push(QueryNode { label, is_preference, parent, edge, children: Vec::new() });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        while self.peek() == Some('[') {
            let open = self.offset();
            self.pos += 1;
            let edge = match (self.peek(), self.peek2()) {
                (Some('/'), Some('/')) => {
                    self.pos += 2;
                    EdgeKind::AncestorDescendant
                }
                (Some('/'), _) => {
                    self.pos += 1;
                    EdgeKind::ParentChild
                }
                _ => EdgeKind::ParentChild,
            };
            self.path(Some(id), edge)?;
            if self.peek() != Some(']') {
                if self.peek().is_none() {
                    return Err(QueryParseError { position: open, message: "unbalanced '['".into() });
                }
                return self.error("expected ']'");
            }
            self.pos += 1;
        }
        if let Some(c) = self.peek() {
            if is_label_char(c) {
                return self.error("expected '/', '//', '[' or ']' between steps");
            }
            if c == '!' {
                return self.error("'!' must directly follow a label");
            }
        }
        Ok(id)
    }
}

/// Renumber nodes so ids follow preorder with children in their stored order.
fn preorder(nodes: Vec<QueryNode>) -> Vec<QueryNode> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![0];
    while let Some(n) = stack.pop() {
        order.push(n);
        stack.extend(nodes[n].children.iter().rev());
    }
    let mut new_id = vec![0; nodes.len()];
    for (i, &old) in order.iter().enumerate() {
        new_id[old] = i;
    }
    order
        .iter()
        .map(|&old| {
            let n = &nodes[old];
            QueryNode {
                label: n.label.clone(),
                is_preference: n.is_preference,
                parent: n.parent.map(|p| new_id[p]),
                edge: n.edge,
                children: n.children.iter().map(|&c| new_id[c]).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(q: &QueryTree) -> Vec<(String, bool, Option<usize>, EdgeKind)> {
        q.nodes().iter().map(|n| (n.label.clone(), n.is_preference, n.parent, n.edge)).collect()
    }

    use EdgeKind::{AncestorDescendant as AD, ParentChild as PC};

    #[test]
    fn simple_preference_path() {
        let q = QueryTree::parse("A/B!").unwrap();
        assert_eq!(shape(&q), vec![("A".into(), false, None, PC), ("B".into(), true, Some(0), PC)]);
        assert!(!q.rooted_at_document_root());
    }

    #[test]
    fn running_example_shape() {
        let q = QueryTree::parse("/A[B!/C]/D/E").unwrap();
        assert!(q.rooted_at_document_root());
        assert_eq!(
            shape(&q),
            vec![
                ("A".into(), false, None, PC),
                ("B".into(), true, Some(0), PC),
                ("C".into(), false, Some(1), PC),
                ("D".into(), false, Some(0), PC),
                ("E".into(), false, Some(3), PC),
            ]
        );
        assert_eq!(q.node(0).children, vec![1, 3]);
    }

    #[test]
    fn descendant_edges() {
        let q = QueryTree::parse("A//B").unwrap();
        assert_eq!(q.node(1).edge, AD);
        let q = QueryTree::parse("A[//B][/C]//D").unwrap();
        assert_eq!(shape(&q).iter().map(|s| s.3).collect::<Vec<_>>(), vec![PC, AD, PC, AD]);
    }

    #[test]
    fn separated_first_query_variant() {
        let q = QueryTree::parse("A[B![C/D]/E]/F[G[//H[I!/J]/K]/L]/M").unwrap();
        assert_eq!(q.len(), 13);
        assert_eq!(q.preference_nodes().map(|i| q.node(i).label.clone()).collect::<Vec<_>>(), vec!["B", "I"]);
        // B's predicate child C comes before its trailing child E
        let b = 1;
        let kids: Vec<_> = q.node(b).children.iter().map(|&c| q.node(c).label.clone()).collect();
        assert_eq!(kids, vec!["C", "E"]);
    }

    #[test]
    fn parse_errors() {
        for (text, pos) in [
            ("", 0),
            ("A[B", 1),
            ("A]B", 1),
            ("A/!B", 2),
            ("A!!", 2),
            ("A/", 2),
            ("A//", 3),
            ("H[I!J]", 4),
            ("//A", 0),
            ("A[]", 2),
        ] {
            let err = QueryTree::parse(text).unwrap_err();
            assert_eq!(err.position, pos, "{text}: {err}");
        }
    }

    #[test]
    fn warnings() {
        assert_eq!(QueryTree::parse("A!").unwrap().validate(), vec![QueryWarning::PreferenceRoot]);
        assert!(QueryTree::parse("/A[B!/C]/D/E").unwrap().validate().is_empty());
        let w = QueryTree::parse("A[B![C!/D]]").unwrap().validate();
        assert_eq!(w, vec![QueryWarning::NestedPreference { node: 2, ancestor: 1 }]);
    }

    #[test]
    fn display() {
        for text in ["/A[B!/C]/D/E", "A//B", "A[//B][C]/D", "A!"] {
            assert_eq!(QueryTree::parse(text).unwrap().to_string(), text);
        }
    }

    fn arb_query() -> impl Strategy<Value = String> {
        let label = prop::sample::select(vec!["A", "B", "C", "Dx", "e_1"]);
        let leaf = (label, any::<bool>()).prop_map(|(l, p)| format!("{l}{}", if p { "!" } else { "" }));
        leaf.prop_recursive(5, 10, 3, |inner| {
            (inner.clone(), prop::collection::vec((inner, any::<bool>()), 1..3)).prop_map(|(head, rest)| {
                let mut s = head;
                let n = rest.len();
                for (i, (r, ad)) in rest.into_iter().enumerate() {
                    let sep = if ad { "//" } else { "/" };
                    if i + 1 < n {
                        s.push_str(&format!("[{}{r}]", if ad { "//" } else { "" }));
                    } else {
                        s.push_str(sep);
                        s.push_str(&r);
                    }
                }
                s
            })
        })
    }

    proptest! {
        #[test]
        fn unparse_reparses_identically(text in arb_query(), rooted in any::<bool>()) {
            let text = if rooted { format!("/{text}") } else { text };
            let q = QueryTree::parse(&text).unwrap();
            let again = QueryTree::parse(&q.to_string()).unwrap();
            prop_assert_eq!(&again, &q);
            prop_assert_eq!(q.preference_nodes().count(), text.matches('!').count());
        }
    }
}
