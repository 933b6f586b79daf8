//! Strong DataGuide annotated with region-encoding occurrence lists.
//!
//! Every distinct root-to-node label path of the document is one key; the
//! key maps to the regions of all nodes reached by that path, sorted by
//! `start`. Keys are numbered in order of first appearance in the document.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::doc::{document_region, DocTree, RegionLabel};

/// Index of a key in an [`AnnotatedDataGuide`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathId(pub u32);

impl PathId {
    /// The implicit document node above every top-level element.
    pub const DOCUMENT: PathId = PathId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Root-to-node label path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathKey(pub Vec<String>);

impl PathKey {
    pub fn parse(text: &str) -> Self {
        PathKey(text.split('/').filter(|s| !s.is_empty()).map(str::to_string).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ends_with(&self, suffix: &PathKey) -> bool {
        self.0.ends_with(&suffix.0)
    }
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl<S: Into<String>> FromIterator<S> for PathKey {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        PathKey(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone)]
pub struct AnnotatedDataGuide {
    keys: Vec<PathKey>,
    lists: Vec<Vec<RegionLabel>>,
    parents: Vec<Option<PathId>>,
    children: Vec<Vec<PathId>>,
    top: Vec<PathId>,
    lookup: HashMap<PathKey, PathId>,
    root_label: String,
    node_count: usize,
}

impl PartialEq for AnnotatedDataGuide {
    fn eq(&self, other: &Self) -> bool {
        self.root_label == other.root_label
            && self.node_count == other.node_count
            && self.keys == other.keys
            && self.lists == other.lists
    }
}

impl Eq for AnnotatedDataGuide {}

pub const INDEX_MAGIC: &str = "PREFQ-IDX";
pub const INDEX_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("empty index")]
    Empty,
    #[error("unsupported index version {0:?} (expected {INDEX_VERSION})")]
    VersionMismatch(String),
    #[error("truncated index: header declares {expected} nodes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed index line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsorted occurrences on line {line}")]
    Unsorted { line: usize },
}

impl IndexError {
    /// Stable numeric code per error kind.
    pub fn code(&self) -> u8 {
        match self {
            IndexError::Empty => 1,
            IndexError::VersionMismatch(_) => 2,
            IndexError::Truncated { .. } => 3,
            IndexError::Malformed { .. } => 4,
            IndexError::Unsorted { .. } => 5,
        }
    }
}

impl AnnotatedDataGuide {
    pub fn build(doc: &DocTree) -> Self {
        let mut dg = Self::empty(doc.root().label.clone(), doc.len());
        let mut node_key: Vec<PathId> = Vec::with_capacity(doc.len());
        // nodes are in document order, so parents precede children and lists
        // come out sorted by start
        for node in doc.nodes() {
            let parent = node.parent.map(|p| node_key[p]);
            let id = dg.intern_child(parent, &node.label);
            dg.lists[id.index()].push(node.region);
            node_key.push(id);
        }
        dg
    }

    fn empty(root_label: String, node_count: usize) -> Self {
        Self {
            keys: Vec::new(),
            lists: Vec::new(),
            parents: Vec::new(),
            children: Vec::new(),
            top: Vec::new(),
            lookup: HashMap::new(),
            root_label,
            node_count,
        }
    }

    fn intern_child(&mut self, parent: Option<PathId>, label: &str) -> PathId {
        let siblings = match parent {
            Some(p) => &self.children[p.index()],
            None => &self.top,
        };
        if let Some(&id) = siblings.iter().find(|id| self.keys[id.index()].0.last().map(String::as_str) == Some(label)) {
            return id;
        }
        let mut labels = parent.map(|p| self.keys[p.index()].0.clone()).unwrap_or_default();
        labels.push(label.to_string());
        self.insert_key(PathKey(labels), parent, Vec::new())
    }

    fn insert_key(&mut self, key: PathKey, parent: Option<PathId>, list: Vec<RegionLabel>) -> PathId {
        let id = PathId(self.keys.len() as u32);
        self.lookup.insert(key.clone(), id);
        self.keys.push(key);
        self.lists.push(list);
        self.parents.push(parent);
        self.children.push(Vec::new());
        match parent {
            Some(p) => self.children[p.index()].push(id),
            None => self.top.push(id),
        }
        id
    }

    pub fn root_label(&self) -> &str {
        &self.root_label
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    pub fn document_region(&self) -> RegionLabel {
        document_region(self.node_count)
    }

    pub fn entries(&self) -> impl Iterator<Item = (PathId, &PathKey, &[RegionLabel])> {
        self.keys
            .iter()
            .zip(&self.lists)
            .enumerate()
            .map(|(i, (k, l))| (PathId(i as u32), k, l.as_slice()))
    }

    pub fn key(&self, id: PathId) -> &PathKey {
        &self.keys[id.index()]
    }

    pub fn list(&self, id: PathId) -> &[RegionLabel] {
        &self.lists[id.index()]
    }

    pub fn lookup(&self, key: &PathKey) -> Option<PathId> {
        self.lookup.get(key).copied()
    }

    pub fn parent_key(&self, id: PathId) -> Option<PathId> {
        self.parents[id.index()]
    }

    /// Keys one label longer than `id` (top-level keys for the document).
    pub fn child_keys(&self, id: PathId) -> &[PathId] {
        if id == PathId::DOCUMENT {
            &self.top
        } else {
            &self.children[id.index()]
        }
    }

    /// Occurrences of a strict path; empty when the path does not occur.
    pub fn eval_strict_path(&self, path: &PathKey) -> &[RegionLabel] {
        self.lookup(path).map(|id| self.list(id)).unwrap_or(&[])
    }

    /// Occurrences of every key ending with `suffix`, merged by start.
    pub fn eval_suffix_path(&self, suffix: &PathKey) -> Vec<RegionLabel> {
        let mut out: Vec<RegionLabel> = self
            .entries()
            .filter(|(_, k, _)| k.ends_with(suffix))
            .flat_map(|(_, _, l)| l.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The ancestor-or-self of `region` (an occurrence of key `path`) at `level`.
    pub fn ancestor_at_level(&self, path: PathId, region: RegionLabel, level: u32) -> RegionLabel {
        self.ancestor_entry_at_level(path, region, level).0
    }

    /// Like [`Self::ancestor_at_level`], also returning the ancestor's key.
    pub fn ancestor_entry_at_level(&self, path: PathId, region: RegionLabel, level: u32) -> (RegionLabel, PathId) {
        if level == 0 {
            return (self.document_region(), PathId::DOCUMENT);
        }
        let mut key = path;
        let mut depth = region.level;
        while depth > level {
            key = self.parents[key.index()].expect("ancestor level within key length");
            depth -= 1;
        }
        if depth == region.level {
            return (region, key);
        }
        let list = &self.lists[key.index()];
        let idx = list.partition_point(|r| r.start < region.start);
        let found = list[idx - 1];
        debug_assert!(crate::doc::is_ancestor(found, region));
        (found, key)
    }

    /// Children of an occurrence of key `path`, in document order.
    pub fn children_of(&self, path: PathId, region: RegionLabel) -> Vec<(RegionLabel, PathId)> {
        let mut out = Vec::new();
        for &ck in self.child_keys(path) {
            let list = &self.lists[ck.index()];
            let lo = list.partition_point(|r| r.start <= region.start);
            let hi = list.partition_point(|r| r.start < region.end);
            out.extend(list[lo..hi].iter().map(|&r| (r, ck)));
        }
        out.sort_unstable_by_key(|(r, _)| r.start);
        out
    }

    /// Line-oriented text form: a header then one `path\tstart,end,level;...` line per key.
    pub fn save_index(&self) -> String {
        let mut out = format!(
            "{INDEX_MAGIC} {INDEX_VERSION} root={} nodes={}\n",
            self.root_label, self.node_count
        );
        for (_, key, list) in self.entries() {
            out.push_str(&key.to_string());
            out.push('\t');
            for (i, r) in list.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                let _ = write!(out, "{},{},{}", r.start, r.end, r.level);
            }
            out.push('\n');
        }
        out
    }

    pub fn load_index(text: &str) -> Result<Self, IndexError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().filter(|(_, h)| !h.trim().is_empty()).ok_or(IndexError::Empty)?;
        let malformed = |line: usize, message: &str| IndexError::Malformed { line, message: message.to_string() };

        let mut fields = header.split(' ');
        if fields.next() != Some(INDEX_MAGIC) {
            return Err(malformed(1, "missing PREFQ-IDX header"));
        }
        match fields.next() {
            Some(INDEX_VERSION) => {}
            Some(v) => return Err(IndexError::VersionMismatch(v.to_string())),
            None => return Err(malformed(1, "missing version")),
        }
        let root_label = fields
            .next()
            .and_then(|f| f.strip_prefix("root="))
            .ok_or_else(|| malformed(1, "missing root="))?
            .to_string();
        let node_count: usize = fields
            .next()
            .and_then(|f| f.strip_prefix("nodes="))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| malformed(1, "missing or invalid nodes="))?;

        let mut dg = Self::empty(root_label, node_count);
        let mut found = 0usize;
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (path, occs) = line.split_once('\t').ok_or_else(|| malformed(no, "expected <path>\\t<occurrences>"))?;
            let key = PathKey::parse(path);
            if key.is_empty() || key.to_string() != path {
                return Err(malformed(no, "invalid path"));
            }
            if dg.lookup.contains_key(&key) {
                return Err(malformed(no, "duplicate path"));
            }
            let parent = if key.len() == 1 {
                None
            } else {
                let prefix = PathKey(key.0[..key.len() - 1].to_vec());
                Some(dg.lookup(&prefix).ok_or_else(|| malformed(no, "parent path not declared before child"))?)
            };
            let mut list = Vec::new();
            for triple in occs.split(';').filter(|t| !t.is_empty()) {
                let nums: Vec<u32> = triple
                    .split(',')
                    .map(|n| n.parse::<u32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| malformed(no, "invalid occurrence triple"))?;
                let [start, end, level] = nums[..] else {
                    return Err(malformed(no, "occurrence must be start,end,level"));
                };
                if start >= end || level as usize != key.len() {
                    return Err(malformed(no, "inconsistent occurrence"));
                }
                list.push(RegionLabel::new(start, end, level));
            }
            if list.windows(2).any(|w| w[0].start >= w[1].start) {
                return Err(IndexError::Unsorted { line: no });
            }
            found += list.len();
            dg.insert_key(key, parent, list);
        }
        if found < node_count {
            return Err(IndexError::Truncated { expected: node_count, found });
        }
        if found > node_count {
            return Err(malformed(0, "more occurrences than declared nodes"));
        }
        Ok(dg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dg(xml: &str) -> AnnotatedDataGuide {
        AnnotatedDataGuide::build(&DocTree::parse(xml).unwrap())
    }

    fn key(s: &str) -> PathKey {
        PathKey::parse(s)
    }

    const EX2: &str = "<A><B/><B/><A><B/></A></A>";

    #[test]
    fn build_examples() {
        let r = RegionLabel::new;
        let g = dg("<A><B/><C/></A>");
        let got: Vec<_> = g.entries().map(|(_, k, l)| (k.to_string(), l.to_vec())).collect();
        assert_eq!(
            got,
            vec![
                ("A".to_string(), vec![r(1, 6, 1)]),
                ("A/B".to_string(), vec![r(2, 3, 2)]),
                ("A/C".to_string(), vec![r(4, 5, 2)]),
            ]
        );
        let g = dg(EX2);
        let got: Vec<_> = g.entries().map(|(_, k, l)| (k.to_string(), l.to_vec())).collect();
        assert_eq!(
            got,
            vec![
                ("A".to_string(), vec![r(1, 10, 1)]),
                ("A/B".to_string(), vec![r(2, 3, 2), r(4, 5, 2)]),
                ("A/A".to_string(), vec![r(6, 9, 2)]),
                ("A/A/B".to_string(), vec![r(7, 8, 3)]),
            ]
        );
        assert_eq!(dg("<A/>").eval_strict_path(&key("A")), &[r(1, 2, 1)]);
    }

    #[test]
    fn strict_and_suffix_paths() {
        let r = RegionLabel::new;
        let g = dg(EX2);
        assert_eq!(g.eval_strict_path(&key("A/B")), &[r(2, 3, 2), r(4, 5, 2)]);
        assert!(g.eval_strict_path(&key("A/X")).is_empty());
        assert_eq!(g.eval_suffix_path(&key("B")), vec![r(2, 3, 2), r(4, 5, 2), r(7, 8, 3)]);
        // A/A/B also ends with A/B
        assert_eq!(g.eval_suffix_path(&key("A/B")), vec![r(2, 3, 2), r(4, 5, 2), r(7, 8, 3)]);
        assert!(g.eval_suffix_path(&key("Z")).is_empty());
        assert_eq!(dg("<A><B/><C/></A>").eval_strict_path(&key("A")), &[r(1, 6, 1)]);
    }

    #[test]
    fn ancestor_and_children_lookup() {
        let r = RegionLabel::new;
        let g = dg(EX2);
        let aab = g.lookup(&key("A/A/B")).unwrap();
        assert_eq!(g.ancestor_at_level(aab, r(7, 8, 3), 2), r(6, 9, 2));
        assert_eq!(g.ancestor_at_level(aab, r(7, 8, 3), 1), r(1, 10, 1));
        assert_eq!(g.ancestor_at_level(aab, r(7, 8, 3), 0), r(0, 11, 0));
        let a = g.lookup(&key("A")).unwrap();
        let kids: Vec<_> = g.children_of(a, r(1, 10, 1)).into_iter().map(|(r, _)| r).collect();
        assert_eq!(kids, vec![r(2, 3, 2), r(4, 5, 2), r(6, 9, 2)]);
        let top: Vec<_> = g.children_of(PathId::DOCUMENT, g.document_region()).into_iter().map(|(r, _)| r).collect();
        assert_eq!(top, vec![r(1, 10, 1)]);
    }

    #[test]
    fn save_format() {
        assert_eq!(dg("<A/>").save_index(), "PREFQ-IDX v1 root=A nodes=1\nA\t1,2,1\n");
        let text = dg(EX2).save_index();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("A/B\t2,3,2;4,5,2\n"));
    }

    #[test]
    fn load_round_trip() {
        let g = dg("<A><B/><C/></A>");
        assert_eq!(AnnotatedDataGuide::load_index(&g.save_index()).unwrap(), g);
    }

    #[test]
    fn load_errors() {
        assert_eq!(AnnotatedDataGuide::load_index(""), Err(IndexError::Empty));
        assert_eq!(
            AnnotatedDataGuide::load_index("PREFQ-IDX v9 root=A nodes=1\nA\t1,2,1\n"),
            Err(IndexError::VersionMismatch("v9".into()))
        );
        assert_eq!(
            AnnotatedDataGuide::load_index("PREFQ-IDX v1 root=A nodes=3\nA\t1,6,1\nA/B\t2,3,2\n"),
            Err(IndexError::Truncated { expected: 3, found: 2 })
        );
        assert_eq!(
            AnnotatedDataGuide::load_index("PREFQ-IDX v1 root=A nodes=3\nA\t1,6,1\nA/B\t4,5,2;2,3,2\n"),
            Err(IndexError::Unsorted { line: 3 })
        );
        let bad = AnnotatedDataGuide::load_index("PREFQ-IDX v1 root=A nodes=1\nA 1,2,1\n").unwrap_err();
        assert!(matches!(bad, IndexError::Malformed { line: 2, .. }));
        assert!(matches!(
            AnnotatedDataGuide::load_index("PREFQ-IDX v1 root=A nodes=1\nA\t1,2\n"),
            Err(IndexError::Malformed { .. })
        ));
        let codes: Vec<u8> = [
            IndexError::Empty,
            IndexError::VersionMismatch(String::new()),
            IndexError::Truncated { expected: 0, found: 0 },
            IndexError::Malformed { line: 0, message: String::new() },
            IndexError::Unsorted { line: 0 },
        ]
        .iter()
        .map(IndexError::code)
        .collect();
        assert_eq!(codes, vec![1, 2, 3, 4, 5]);
    }
}
