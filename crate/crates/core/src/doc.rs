//! Element-only document model with region-encoding labels.
//!
//! Every element receives a `(start, end, level)` triplet from a single
//! counter that ticks once at each open tag and once at each close tag, so
//! for a document of `n` elements the labels use exactly the values `1..=2n`.
//! Text, attributes, comments and processing instructions are dropped.

use std::fmt;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Serialize;
use thiserror::Error;

/// Region-encoding triplet of a document node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegionLabel {
    pub start: u32,
    pub end: u32,
    pub level: u32,
}

impl RegionLabel {
    pub const fn new(start: u32, end: u32, level: u32) -> Self {
        Self { start, end, level }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.level)
    }
}

/// `a` is a proper ancestor of `b`.
#[inline]
pub fn is_ancestor(a: RegionLabel, b: RegionLabel) -> bool {
    a.start < b.start && b.start < a.end
}

/// `a` is the parent of `b`.
#[inline]
pub fn is_parent(a: RegionLabel, b: RegionLabel) -> bool {
    is_ancestor(a, b) && a.level + 1 == b.level
}

/// `a` starts before `b`.
#[inline]
pub fn precedes(a: RegionLabel, b: RegionLabel) -> bool {
    a.start < b.start
}

/// `a` starts after `b` has closed.
#[inline]
pub fn follows(a: RegionLabel, b: RegionLabel) -> bool {
    b.end < a.start
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocNode {
    pub label: String,
    pub region: RegionLabel,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// An immutable element tree. Nodes are stored in document order, so a
/// node's id is also its rank by `region.start`.
///
/// More than one top-level element is accepted (an XML fragment); all of
/// them sit at level 1 and share one counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocTree {
    nodes: Vec<DocNode>,
    roots: Vec<NodeId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DocError {
    #[error("no root element")]
    NoRoot,
    #[error("malformed XML at byte {position}: {message}")]
    Malformed { position: usize, message: String },
}

impl DocTree {
    pub fn parse(xml: &str) -> Result<Self, DocError> {
        let mut reader = Reader::from_str(xml);
        reader.config_mut().check_end_names = true;
        let mut builder = TreeBuilder::new();
        loop {
            let position = reader.buffer_position() as usize;
            let event = reader.read_event().map_err(|e| DocError::Malformed {
                position: reader.error_position() as usize,
                message: e.to_string(),
            })?;
            match event {
                Event::Start(e) => builder.open(&element_name(e.name().as_ref())),
                Event::Empty(e) => {
                    builder.open(&element_name(e.name().as_ref()));
                    builder.close();
                }
                Event::End(_) => {
                    if builder.depth() == 0 {
                        return Err(DocError::Malformed {
                            position,
                            message: "close tag without matching open tag".into(),
                        });
                    }
                    builder.close();
                }
                Event::Text(t) => {
                    let text = t.unescape().map_err(|e| DocError::Malformed {
                        position,
                        message: e.to_string(),
                    })?;
                    if builder.depth() == 0 && !text.trim().is_empty() {
                        return Err(DocError::Malformed {
                            position,
                            message: "text outside of any element".into(),
                        });
                    }
                }
                Event::Eof => break,
                // comments, CDATA, PIs, declarations and DTDs carry no structure
                _ => {}
            }
        }
        if let Some(open) = builder.open_label() {
            return Err(DocError::Malformed {
                position: xml.len(),
                message: format!("unclosed tag <{open}>"),
            });
        }
        builder.finish()
    }

    /// Build a tree from nested `(label, children)` values; used by generators
    /// and tests.
    pub fn from_forest(forest: &[Element]) -> Self {
        fn walk(b: &mut TreeBuilder, e: &Element) {
            b.open(&e.label);
            for c in &e.children {
                walk(b, c);
            }
            b.close();
        }
        let mut b = TreeBuilder::new();
        for e in forest {
            walk(&mut b, e);
        }
        b.finish().expect("non-empty forest")
    }

    pub fn nodes(&self) -> &[DocNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &DocNode {
        &self.nodes[id]
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    /// The first top-level element.
    pub fn root(&self) -> &DocNode {
        &self.nodes[self.roots[0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Region of the implicit document node that contains every element.
    pub fn document_region(&self) -> RegionLabel {
        document_region(self.nodes.len())
    }

    /// Nodes of the subtree rooted at `id`, excluding `id`, in document order.
    pub fn descendants(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let mut stack: Vec<NodeId> = self.nodes[id].children.iter().rev().copied().collect();
        std::iter::from_fn(move || {
            let next = stack.pop()?;
            stack.extend(self.nodes[next].children.iter().rev());
            Some(next)
        })
    }

    /// Label path from the top level down to `id`.
    pub fn label_path(&self, id: NodeId) -> Vec<String> {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            path.push(self.nodes[n].label.clone());
            cur = self.nodes[n].parent;
        }
        path.reverse();
        path
    }

    pub fn to_forest(&self) -> Vec<Element> {
        fn build(t: &DocTree, id: NodeId) -> Element {
            Element {
                label: t.nodes[id].label.clone(),
                children: t.nodes[id].children.iter().map(|&c| build(t, c)).collect(),
            }
        }
        self.roots.iter().map(|&r| build(self, r)).collect()
    }

    /// Serialize back to element-only XML (empty elements self-close).
    pub fn to_xml(&self) -> String {
        fn write(t: &DocTree, id: NodeId, out: &mut String) {
            let n = &t.nodes[id];
            if n.children.is_empty() {
                out.push_str(&format!("<{}/>", n.label));
            } else {
                out.push_str(&format!("<{}>", n.label));
                for &c in &n.children {
                    write(t, c, out);
                }
                out.push_str(&format!("</{}>", n.label));
            }
        }
        let mut out = String::new();
        for &r in &self.roots {
            write(self, r, &mut out);
        }
        out
    }
}

pub(crate) fn document_region(node_count: usize) -> RegionLabel {
    RegionLabel::new(0, 2 * node_count as u32 + 1, 0)
}

fn element_name(raw: &[u8]) -> String {
    String::from_utf8_lossy(raw).into_owned()
}

/// Owned nested element value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub label: String,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(label: impl Into<String>, children: Vec<Element>) -> Self {
        Self { label: label.into(), children }
    }

    pub fn leaf(label: impl Into<String>) -> Self {
        Self::new(label, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Element::size).sum::<usize>()
    }
}

struct TreeBuilder {
    nodes: Vec<DocNode>,
    roots: Vec<NodeId>,
    open: Vec<NodeId>,
    counter: u32,
}

impl TreeBuilder {
    fn new() -> Self {
        Self { nodes: Vec::new(), roots: Vec::new(), open: Vec::new(), counter: 0 }
    }

    fn depth(&self) -> usize {
        self.open.len()
    }

    fn open_label(&self) -> Option<&str> {
        self.open.last().map(|&id| self.nodes[id].label.as_str())
    }

    fn open(&mut self, label: &str) {
        self.counter += 1;
        let id = self.nodes.len();
        let parent = self.open.last().copied();
        self.nodes.push(DocNode {
            label: label.to_string(),
            region: RegionLabel::new(self.counter, 0, self.open.len() as u32 + 1),
            parent,
            children: Vec::new(),
        });
        match parent {
            Some(p) => self.nodes[p].children.push(id),
            None => self.roots.push(id),
        }
        self.open.push(id);
    }

    fn close(&mut self) {
        self.counter += 1;
        let id = self.open.pop().expect("close without open");
        self.nodes[id].region.end = self.counter;
    }

    fn finish(self) -> Result<DocTree, DocError> {
        if self.roots.is_empty() {
            return Err(DocError::NoRoot);
        }
        Ok(DocTree { nodes: self.nodes, roots: self.roots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regions(xml: &str) -> Vec<(String, RegionLabel)> {
        DocTree::parse(xml)
            .unwrap()
            .nodes()
            .iter()
            .map(|n| (n.label.clone(), n.region))
            .collect()
    }

    #[test]
    fn counter_convention() {
        assert_eq!(
            regions("<A><B/><C/></A>"),
            vec![
                ("A".into(), RegionLabel::new(1, 6, 1)),
                ("B".into(), RegionLabel::new(2, 3, 2)),
                ("C".into(), RegionLabel::new(4, 5, 2)),
            ]
        );
        assert_eq!(regions("<A/>"), vec![("A".into(), RegionLabel::new(1, 2, 1))]);
    }

    #[test]
    fn nested_same_labels() {
        // independent count: walk the tag stream and tick on every '<' that is not a comment
        let xml = "<A><B/><B/><A><B/></A></A>";
        let mut counter = 0;
        let mut starts = Vec::new();
        let bytes = xml.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'<' {
                counter += 1;
                if bytes[i + 1] != b'/' {
                    starts.push(counter);
                    let close = xml[i..].find('>').unwrap() + i;
                    if bytes[close - 1] == b'/' {
                        counter += 1;
                    }
                }
            }
            i += 1;
        }
        assert_eq!(starts, vec![1, 2, 4, 6, 7]);
        assert_eq!(
            regions(xml).into_iter().map(|(_, r)| r).collect::<Vec<_>>(),
            vec![
                RegionLabel::new(1, 10, 1),
                RegionLabel::new(2, 3, 2),
                RegionLabel::new(4, 5, 2),
                RegionLabel::new(6, 9, 2),
                RegionLabel::new(7, 8, 3),
            ]
        );
    }

    #[test]
    fn structural_predicates() {
        let r = RegionLabel::new;
        assert!(is_ancestor(r(1, 6, 1), r(2, 3, 2)));
        assert!(!is_ancestor(r(2, 3, 2), r(4, 5, 2)));
        assert!(is_ancestor(r(1, 10, 1), r(7, 8, 3)));
        assert!(is_parent(r(1, 6, 1), r(2, 3, 2)));
        assert!(!is_parent(r(1, 10, 1), r(7, 8, 3)));
        assert!(is_parent(r(6, 9, 2), r(7, 8, 3)));
        assert!(precedes(r(2, 3, 2), r(4, 5, 2)));
        assert!(follows(r(4, 5, 2), r(2, 3, 2)));
        assert!(!follows(r(2, 3, 2), r(1, 6, 1)));
    }

    #[test]
    fn drops_text_attributes_comments() {
        let t = DocTree::parse(
            "<?xml version=\"1.0\"?><!-- c --><A x=\"1\">hi &amp; <B>t</B><?pi x?><![CDATA[z]]></A>",
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.node(1).region, RegionLabel::new(2, 3, 2));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(DocTree::parse(""), Err(DocError::NoRoot));
        assert_eq!(DocTree::parse("  \n"), Err(DocError::NoRoot));
        assert!(matches!(DocTree::parse("<A><B></A>"), Err(DocError::Malformed { .. })));
        assert!(matches!(DocTree::parse("<A><B/>"), Err(DocError::Malformed { .. })));
        assert!(matches!(DocTree::parse("</A>"), Err(DocError::Malformed { .. })));
        assert!(matches!(DocTree::parse("<A>&nbsp;</A>"), Err(DocError::Malformed { .. })));
        assert!(matches!(DocTree::parse("hello<A/>"), Err(DocError::Malformed { .. })));
    }

    #[test]
    fn forest_shares_counter() {
        let t = DocTree::parse("<A/><A><B/></A>").unwrap();
        assert_eq!(t.roots().len(), 2);
        assert_eq!(t.node(1).region, RegionLabel::new(3, 6, 1));
        assert_eq!(t.document_region(), RegionLabel::new(0, 7, 0));
    }

    #[test]
    fn xml_round_trip() {
        let xml = "<A><B/><B/><A><B/></A></A><C/>";
        assert_eq!(DocTree::parse(xml).unwrap().to_xml(), xml);
    }
}
