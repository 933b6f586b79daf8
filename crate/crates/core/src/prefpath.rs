//! Runtime occurrence lists for rewritten query nodes.
//!
//! Strict tags read their list straight from the DataGuide. A tag ending in a
//! preference step also gets pseudo-occurrences: placeholders standing for
//! "this step is absent here", one group per owner occurrence of the step's
//! parent.

use std::collections::HashSet;
use std::fmt;

use crate::dataguide::{AnnotatedDataGuide, PathId, PathKey};
use crate::doc::RegionLabel;
use crate::query::EdgeKind;
use crate::rewrite::{PrefPathId, PrefPathQuery, PrefPathTree};

/// Open interval claimed by a pseudo-occurrence. A position `p` is covered
/// when `left < p < right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Stamp {
    pub left: u32,
    pub right: u32,
}

impl Stamp {
    pub fn covers(self, pos: u32) -> bool {
        self.left < pos && pos < self.right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Occurrence {
    Real { region: RegionLabel, path: PathId },
    /// `owner` indexes the list's owner occurrences.
    Pseudo { stamp: Stamp, owner: usize },
}

impl Occurrence {
    pub fn is_real(&self) -> bool {
        matches!(self, Occurrence::Real { .. })
    }

    pub fn region(&self) -> Option<RegionLabel> {
        match *self {
            Occurrence::Real { region, .. } => Some(region),
            Occurrence::Pseudo { .. } => None,
        }
    }
}

impl fmt::Display for Occurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occurrence::Real { region, .. } => write!(f, "{region}"),
            Occurrence::Pseudo { stamp, owner } => write!(f, "e({}, {})@{owner}", stamp.left, stamp.right),
        }
    }
}

pub fn next_l(x: &Occurrence) -> u32 {
    match x {
        Occurrence::Real { region, .. } => region.start,
        Occurrence::Pseudo { stamp, .. } => stamp.left,
    }
}

pub fn next_r(x: &Occurrence) -> u32 {
    match x {
        Occurrence::Real { region, .. } => region.end,
        Occurrence::Pseudo { stamp, .. } => stamp.right,
    }
}

/// Where a preference list's owners come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwnerSource {
    /// No pseudo entries: the tag is strict.
    None,
    /// The owners are the entries of the parent node's list (or the document
    /// for the root).
    ParentList,
    /// The owners are real occurrences of the tag's own prefix.
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceList {
    /// Sorted by `next_l`.
    pub entries: Vec<Occurrence>,
    pub owners: Vec<Occurrence>,
    pub owner_source: OwnerSource,
}

impl OccurrenceList {
    fn strict(mut real: Vec<(RegionLabel, PathId)>) -> Self {
        real.sort_unstable_by_key(|(r, _)| r.start);
        Self {
            entries: real.into_iter().map(|(region, path)| Occurrence::Real { region, path }).collect(),
            owners: Vec::new(),
            owner_source: OwnerSource::None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn real_count(&self) -> usize {
        self.entries.iter().filter(|o| o.is_real()).count()
    }

    pub fn pseudo_count(&self) -> usize {
        self.len() - self.real_count()
    }

    /// `b` for real entries and `e` for pseudo ones, in list order.
    pub fn pattern(&self) -> String {
        self.entries.iter().map(|o| if o.is_real() { 'b' } else { 'e' }).collect()
    }

    pub fn render(&self) -> String {
        let parts: Vec<_> = self.entries.iter().map(|o| o.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Pseudo-occurrences for a set of owners, given the real entries of the
/// preference step.
///
/// A real owner gets one pseudo per child that is not a real entry, stamped
/// from the previous sibling's end (or the owner's start) to that child's
/// end. An owner whose children are all real gets one pseudo before the first
/// of them; a childless owner gets one spanning its whole region. A pseudo
/// owner passes its stamp down unchanged.
fn pseudo_entries(
    dg: &AnnotatedDataGuide,
    owners: &[Occurrence],
    real: &[(RegionLabel, PathId)],
) -> Vec<Occurrence> {
    let real_starts: HashSet<u32> = real.iter().map(|(r, _)| r.start).collect();
    let mut out = Vec::new();
    for (idx, owner) in owners.iter().enumerate() {
        match *owner {
            Occurrence::Pseudo { stamp, .. } => out.push(Occurrence::Pseudo { stamp, owner: idx }),
            Occurrence::Real { region, path } => {
                let kids = dg.children_of(path, region);
                let mut boundary = region.start;
                let mut orphans = 0;
                for (x, _) in &kids {
                    if !real_starts.contains(&x.start) {
                        out.push(Occurrence::Pseudo { stamp: Stamp { left: boundary, right: x.end }, owner: idx });
                        orphans += 1;
                    }
                    boundary = x.end;
                }
                if orphans == 0 {
                    let right = kids.first().map_or(region.end, |(x, _)| x.start);
                    out.push(Occurrence::Pseudo { stamp: Stamp { left: region.start, right }, owner: idx });
                }
            }
        }
    }
    out
}

fn merge_entries(real: Vec<(RegionLabel, PathId)>, pseudo: Vec<Occurrence>) -> Vec<Occurrence> {
    let mut all: Vec<Occurrence> =
        real.into_iter().map(|(region, path)| Occurrence::Real { region, path }).chain(pseudo).collect();
    all.sort_by_key(|o| (next_l(o), next_r(o)));
    all
}

fn with_path(dg: &AnnotatedDataGuide, key: &PathKey) -> Vec<(RegionLabel, PathId)> {
    match dg.lookup(key) {
        Some(id) => dg.list(id).iter().map(|&r| (r, id)).collect(),
        None => Vec::new(),
    }
}

/// Evaluate an absolute preference path query.
///
/// The owners are the occurrences of the strict prefix (the document itself
/// for a one-step query); the real entries are the occurrences of the full
/// path.
pub fn eval_pref_path(dg: &AnnotatedDataGuide, p: &PrefPathQuery) -> OccurrenceList {
    let full: PathKey = p.steps.iter().cloned().collect();
    let real = with_path(dg, &full);
    if !p.last_is_preference {
        return OccurrenceList::strict(real);
    }
    let prefix: PathKey = p.strict_prefix().iter().cloned().collect();
    let owners: Vec<Occurrence> = if prefix.is_empty() {
        vec![Occurrence::Real { region: dg.document_region(), path: PathId::DOCUMENT }]
    } else {
        with_path(dg, &prefix).into_iter().map(|(region, path)| Occurrence::Real { region, path }).collect()
    };
    if owners.is_empty() {
        return OccurrenceList { entries: Vec::new(), owners, owner_source: OwnerSource::Prefix };
    }
    let pseudo = pseudo_entries(dg, &owners, &real);
    OccurrenceList { entries: merge_entries(real, pseudo), owners, owner_source: OwnerSource::Prefix }
}

/// One element of a label-path pattern matched against DataGuide keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternStep {
    Label(String),
    /// A preference step: the label may be present or absent.
    Optional(String),
    /// Any number of labels, including none.
    Gap,
}

impl fmt::Display for PatternStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternStep::Label(l) => f.write_str(l),
            PatternStep::Optional(l) => write!(f, "{l}?"),
            PatternStep::Gap => f.write_str("*"),
        }
    }
}

/// Whether `key` is fully matched by `pattern`.
pub fn pattern_matches(pattern: &[PatternStep], key: &[String]) -> bool {
    // reach[j]: pattern prefix consumed so far can match key[..j]
    let mut reach = vec![false; key.len() + 1];
    reach[0] = true;
    for step in pattern {
        let mut next = vec![false; key.len() + 1];
        for j in 0..=key.len() {
            match step {
                PatternStep::Label(l) => {
                    if j > 0 && reach[j - 1] && &key[j - 1] == l {
                        next[j] = true;
                    }
                }
                PatternStep::Optional(l) => {
                    next[j] = reach[j] || (j > 0 && reach[j - 1] && &key[j - 1] == l);
                }
                PatternStep::Gap => {
                    next[j] = reach[j] || (j > 0 && next[j - 1]);
                }
            }
        }
        reach = next;
    }
    reach[key.len()]
}

/// Label patterns describing every DataGuide key a node's last step can sit
/// at. Preference steps of ancestors become optional; a descendant edge
/// restarts the pattern with a gap.
pub fn node_patterns(t: &PrefPathTree, labels: &dyn Fn(usize) -> String) -> Vec<Vec<PatternStep>> {
    let mut out: Vec<Vec<PatternStep>> = Vec::with_capacity(t.len());
    for n in t.nodes() {
        let mut pat = match (n.edge, n.parent) {
            (EdgeKind::AncestorDescendant, _) => vec![PatternStep::Gap],
            (EdgeKind::ParentChild, Some(p)) => out[p].clone(),
            (EdgeKind::ParentChild, None) => Vec::new(),
        };
        let last = n.chain.len() - 1;
        for (i, &q) in n.chain.iter().enumerate() {
            if i == last && n.is_preference() {
                pat.push(PatternStep::Optional(labels(q)));
            } else {
                pat.push(PatternStep::Label(labels(q)));
            }
        }
        out.push(pat);
    }
    out
}

/// Real occurrences of every key matched by `pattern` whose last step is
/// forced present.
fn pattern_occurrences(dg: &AnnotatedDataGuide, pattern: &[PatternStep]) -> Vec<(RegionLabel, PathId)> {
    let mut pat = pattern.to_vec();
    if let Some(PatternStep::Optional(l)) = pat.last().cloned() {
        *pat.last_mut().unwrap() = PatternStep::Label(l);
    }
    let mut out = Vec::new();
    for (id, key, list) in dg.entries() {
        if pattern_matches(&pat, key.labels()) {
            out.extend(list.iter().map(|&r| (r, id)));
        }
    }
    out.sort_unstable_by_key(|(r, _)| r.start);
    out
}

/// Build the occurrence list of every node of a rewritten query, indexed by
/// node id.
pub fn assign_lists(dg: &AnnotatedDataGuide, t: &PrefPathTree, labels: &dyn Fn(usize) -> String) -> Vec<OccurrenceList> {
    let patterns = node_patterns(t, labels);
    let mut lists: Vec<OccurrenceList> = Vec::with_capacity(t.len());
    for (id, n) in t.nodes().iter().enumerate() {
        let real = pattern_occurrences(dg, &patterns[id]);
        if !n.is_preference() {
            lists.push(OccurrenceList::strict(real));
            continue;
        }
        let m = n.chain.len();
        let (owners, source) = if m == 1 {
            let owners = match n.parent {
                Some(p) => lists[p].entries.clone(),
                None => vec![Occurrence::Real { region: dg.document_region(), path: PathId::DOCUMENT }],
            };
            (owners, OwnerSource::ParentList)
        } else {
            let prefix = &patterns[id][..patterns[id].len() - 1];
            let owners = pattern_occurrences(dg, prefix)
                .into_iter()
                .map(|(region, path)| Occurrence::Real { region, path })
                .collect();
            (owners, OwnerSource::Prefix)
        };
        let pseudo = pseudo_entries(dg, &owners, &real);
        lists.push(OccurrenceList { entries: merge_entries(real, pseudo), owners, owner_source: source });
    }
    lists
}

/// Node id to list, convenience for callers holding the query.
pub fn assign_lists_for(
    dg: &AnnotatedDataGuide,
    t: &PrefPathTree,
    q: &crate::query::QueryTree,
) -> Vec<OccurrenceList> {
    assign_lists(dg, t, &|n| q.node(n).label.clone())
}

/// Check the coverage rules of a list produced by [`eval_pref_path`]: every
/// child of an owner that is not a real entry lies inside exactly one of that
/// owner's stamps, no stamp covers a real entry, the list is sorted and
/// stamps do not overlap.
pub fn check_coverage(dg: &AnnotatedDataGuide, list: &OccurrenceList) -> Result<(), String> {
    let starts: Vec<u32> = list.entries.iter().map(next_l).collect();
    if starts.windows(2).any(|w| w[0] > w[1]) {
        return Err("entries are not sorted".into());
    }
    let stamps: Vec<(Stamp, usize)> = list
        .entries
        .iter()
        .filter_map(|o| match *o {
            Occurrence::Pseudo { stamp, owner } => Some((stamp, owner)),
            _ => None,
        })
        .collect();
    for (s, _) in &stamps {
        if s.left >= s.right {
            return Err(format!("empty stamp ({}, {})", s.left, s.right));
        }
    }
    for w in stamps.windows(2) {
        if w[1].0.left < w[0].0.right {
            return Err(format!("stamps ({}, {}) and ({}, {}) overlap", w[0].0.left, w[0].0.right, w[1].0.left, w[1].0.right));
        }
    }
    let real: HashSet<u32> = list.entries.iter().filter_map(|o| o.region()).map(|r| r.start).collect();
    for o in &list.entries {
        if let Some(r) = o.region() {
            if let Some((s, _)) = stamps.iter().find(|(s, _)| s.covers(r.start)) {
                return Err(format!("stamp ({}, {}) covers real entry {r}", s.left, s.right));
            }
        }
    }
    for (idx, owner) in list.owners.iter().enumerate() {
        let Occurrence::Real { region, path } = *owner else { continue };
        let mine: Vec<Stamp> = stamps.iter().filter(|(_, o)| *o == idx).map(|(s, _)| *s).collect();
        if mine.is_empty() {
            return Err(format!("owner {region} has no pseudo entry"));
        }
        for (c, _) in dg.children_of(path, region) {
            if real.contains(&c.start) {
                continue;
            }
            let hits = mine.iter().filter(|s| s.covers(c.start)).count();
            if hits != 1 {
                return Err(format!("child {c} of owner {region} lies in {hits} stamps"));
            }
        }
    }
    Ok(())
}

/// Labels of a list's entries, used by the explain output.
pub fn describe_lists(t: &PrefPathTree, lists: &[OccurrenceList]) -> String {
    let mut out = String::new();
    for (id, list) in lists.iter().enumerate() {
        let node = t.node(id as PrefPathId);
        out.push_str(&format!("{}: {}\n", node.tag, list.render()));
    }
    out
}
