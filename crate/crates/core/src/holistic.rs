//! Holistic twig matching over runtime occurrence lists.
//!
//! A TwigStack pass produces root-to-leaf path solutions, which are then
//! joined into full candidate rows. Pseudo-occurrences take part in matching
//! like ordinary entries; a row bound through a pseudo leaves its preference
//! node unbound and its flag false.

use std::collections::HashMap;

use serde::Serialize;

use crate::dataguide::{AnnotatedDataGuide, PathId};
use crate::doc::{is_ancestor, RegionLabel};
use crate::prefpath::{Occurrence, OccurrenceList, OwnerSource};
use crate::query::{EdgeKind, QueryNodeId, QueryTree};
use crate::rewrite::PrefPathTree;

/// One candidate solution. Vectors are aligned with the owning table's
/// column lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CandidateRow {
    pub bindings: Vec<RegionLabel>,
    pub pref_bindings: Vec<Option<RegionLabel>>,
    pub pref_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreferenceTable {
    /// Strict query nodes, in preorder.
    pub strict_columns: Vec<QueryNodeId>,
    /// Preference query nodes, in preorder.
    pub pref_columns: Vec<QueryNodeId>,
    pub rows: Vec<CandidateRow>,
}

impl PreferenceTable {
    pub fn empty_for(q: &QueryTree) -> Self {
        Self { strict_columns: q.strict_nodes().collect(), pref_columns: q.preference_nodes().collect(), rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Bindings of a row indexed by query node; `None` for an absent
    /// preference node.
    pub fn assignment(&self, row: &CandidateRow) -> Vec<Option<RegionLabel>> {
        let n = self.strict_columns.len() + self.pref_columns.len();
        let mut out = vec![None; n];
        for (&c, &b) in self.strict_columns.iter().zip(&row.bindings) {
            out[c] = Some(b);
        }
        for (&c, &b) in self.pref_columns.iter().zip(&row.pref_bindings) {
            out[c] = b;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchStats {
    /// Cursor moves over all streams.
    pub advances: u64,
    /// Sum of the input list lengths.
    pub list_entries: u64,
    pub path_solutions: u64,
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Root,
    Real { region: RegionLabel, path: PathId },
    /// Stands for an absent last step; `owner` is the owner occurrence when it
    /// is a real prefix occurrence.
    Pseudo { owner: Option<(RegionLabel, PathId)>, parent_entry: Option<usize> },
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    lo: u64,
    hi: u64,
    item: Item,
    /// Region structural checks of children are made against, and whether
    /// children may sit at any depth below it.
    anchor: RegionLabel,
    anchor_desc: bool,
}

struct Node {
    parent: Option<usize>,
    children: Vec<usize>,
    /// Chain length of the rewritten node (0 for the document).
    steps: u32,
    edge: EdgeKind,
    entries: Vec<Entry>,
    cursor: usize,
    /// (entry index, index of the parent's stack top when pushed)
    stack: Vec<(usize, usize)>,
    leaves_below: Vec<usize>,
}

struct Matcher {
    nodes: Vec<Node>,
    advances: u64,
    solutions: Vec<Vec<Vec<usize>>>,
    leaf_slot: HashMap<usize, usize>,
}

const END: u64 = u64::MAX;

impl Matcher {
    fn next_lo(&self, q: usize) -> u64 {
        let n = &self.nodes[q];
        n.entries.get(n.cursor).map_or(END, |e| e.lo)
    }

    fn next_hi(&self, q: usize) -> u64 {
        let n = &self.nodes[q];
        n.entries.get(n.cursor).map_or(END, |e| e.hi)
    }

    fn exhausted(&self, q: usize) -> bool {
        self.nodes[q].cursor >= self.nodes[q].entries.len()
    }

    fn advance(&mut self, q: usize) {
        self.nodes[q].cursor += 1;
        self.advances += 1;
    }

    fn is_leaf(&self, q: usize) -> bool {
        self.nodes[q].children.is_empty()
    }

    fn ended(&self, q: usize) -> bool {
        self.nodes[q].leaves_below.iter().all(|&l| self.exhausted(l))
    }

    fn get_next(&mut self, q: usize) -> usize {
        if self.is_leaf(q) {
            return q;
        }
        let kids = self.nodes[q].children.clone();
        let mut live = Vec::with_capacity(kids.len());
        let mut some_ended = false;
        for c in kids {
            if self.ended(c) {
                some_ended = true;
                continue;
            }
            let n = self.get_next(c);
            if n != c {
                return n;
            }
            live.push(c);
        }
        if some_ended {
            // q can no longer gain a complete extension
            while !self.exhausted(q) {
                self.advance(q);
            }
        }
        let nmin = *live.iter().min_by_key(|&&c| self.next_lo(c)).expect("q is not ended");
        let max_lo = live.iter().map(|&c| self.next_lo(c)).max().unwrap();
        while self.next_hi(q) < max_lo {
            self.advance(q);
        }
        if self.next_lo(q) < self.next_lo(nmin) {
            q
        } else {
            nmin
        }
    }

    fn clean_stack(&mut self, q: usize, lo: u64) {
        let n = &mut self.nodes[q];
        while let Some(&(e, _)) = n.stack.last() {
            if n.entries[e].hi < lo {
                n.stack.pop();
            } else {
                break;
            }
        }
    }

    fn push(&mut self, q: usize) {
        let ptr = match self.nodes[q].parent {
            Some(p) => self.nodes[p].stack.len().wrapping_sub(1),
            None => usize::MAX,
        };
        let e = self.nodes[q].cursor;
        self.nodes[q].stack.push((e, ptr));
        if cfg!(debug_assertions) {
            let n = &self.nodes[q];
            for w in n.stack.windows(2) {
                let (a, b) = (&n.entries[w[0].0], &n.entries[w[1].0]);
                debug_assert!(a.lo <= b.lo && b.hi <= a.hi, "stack entries must nest");
            }
        }
        self.advance(q);
    }

    /// Whether entry `x` of node `child` may extend entry `p` of its parent.
    fn check(&self, child: usize, p: usize, x: usize) -> bool {
        let cn = &self.nodes[child];
        let parent = &self.nodes[cn.parent.expect("child has a parent")];
        let pe = &parent.entries[p];
        let xe = &cn.entries[x];
        let level_ok = |anc: RegionLabel, desc: bool, level: u32, steps: u32| {
            if desc || cn.edge == EdgeKind::AncestorDescendant {
                level >= anc.level + steps
            } else {
                level == anc.level + steps
            }
        };
        match xe.item {
            Item::Root => false,
            Item::Real { region, .. } => {
                is_ancestor(pe.anchor, region) && level_ok(pe.anchor, pe.anchor_desc, region.level, cn.steps)
            }
            Item::Pseudo { parent_entry: Some(owner), .. } => owner == p,
            Item::Pseudo { owner: Some((o, _)), .. } => {
                is_ancestor(pe.anchor, o) && level_ok(pe.anchor, pe.anchor_desc, o.level, cn.steps - 1)
            }
            Item::Pseudo { .. } => unreachable!("pseudo without owner"),
        }
    }

    fn show_solutions(&mut self, leaf: usize) {
        let &(top, ptr) = self.nodes[leaf].stack.last().expect("leaf just pushed");
        let mut path = vec![top];
        let mut found = Vec::new();
        self.extend_up(leaf, top, ptr, &mut path, &mut found);
        let slot = self.leaf_slot[&leaf];
        self.solutions[slot].extend(found);
    }

    fn extend_up(&self, q: usize, e: usize, ptr: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some(p) = self.nodes[q].parent else {
            let mut sol = path.clone();
            sol.reverse();
            out.push(sol);
            return;
        };
        for i in 0..=ptr {
            let (pe, pptr) = self.nodes[p].stack[i];
            if self.check(q, pe, e) {
                path.push(pe);
                self.extend_up(p, pe, pptr, path, out);
                path.pop();
            }
        }
    }

    fn run(&mut self) {
        while !self.ended(0) {
            let q = self.get_next(0);
            if let Some(p) = self.nodes[q].parent {
                let lo = self.next_lo(q);
                self.clean_stack(p, lo);
            }
            let parent_live = self.nodes[q].parent.is_none_or(|p| !self.nodes[p].stack.is_empty());
            if parent_live {
                let lo = self.next_lo(q);
                self.clean_stack(q, lo);
                self.push(q);
                if self.is_leaf(q) {
                    self.show_solutions(q);
                    self.nodes[q].stack.pop();
                }
            } else {
                self.advance(q);
            }
        }
    }
}

/// Match a rewritten query against its occurrence lists.
pub fn holistic_match(
    dg: &AnnotatedDataGuide,
    q: &QueryTree,
    t: &PrefPathTree,
    lists: &[OccurrenceList],
) -> (PreferenceTable, MatchStats) {
    let mut table = PreferenceTable::empty_for(q);
    let mut stats =
        MatchStats { list_entries: lists.iter().map(|l| l.len() as u64).sum(), ..MatchStats::default() };
    if lists.iter().any(|l| l.is_empty()) {
        return (table, stats);
    }
    let scale = 2 * (t.len() as u64 + 2);
    let doc = dg.document_region();
    let mut nodes = vec![Node {
        parent: None,
        children: Vec::new(),
        steps: 0,
        edge: EdgeKind::ParentChild,
        entries: vec![Entry {
            lo: 0,
            hi: scale * doc.end as u64,
            item: Item::Root,
            anchor: doc,
            anchor_desc: false,
        }],
        cursor: 0,
        stack: Vec::new(),
        leaves_below: Vec::new(),
    }];
    // list index -> stream entry index, per matcher node
    let mut stream_of: Vec<Vec<Option<usize>>> = vec![vec![Some(0)]];
    for (id, pn) in t.nodes().iter().enumerate() {
        let me = id + 1;
        let parent = pn.parent.map_or(0, |p| p + 1);
        nodes[parent].children.push(me);
        let list = &lists[id];
        let steps = pn.chain.len() as u32;
        let mut entries = Vec::with_capacity(list.len());
        let mut index = vec![None; list.len()];
        let mut seen_owner: HashMap<usize, usize> = HashMap::new();
        for (li, occ) in list.entries.iter().enumerate() {
            match *occ {
                Occurrence::Real { region, path } => {
                    index[li] = Some(entries.len());
                    entries.push(Entry {
                        lo: scale * region.start as u64,
                        hi: scale * region.end as u64,
                        item: Item::Real { region, path },
                        anchor: region,
                        anchor_desc: false,
                    });
                }
                Occurrence::Pseudo { owner, .. } => match list.owner_source {
                    OwnerSource::ParentList => {
                        let Some(pe) = stream_of[parent][owner] else { continue };
                        if let Some(&s) = seen_owner.get(&pe) {
                            index[li] = Some(s);
                            continue;
                        }
                        let o = nodes[parent].entries[pe];
                        seen_owner.insert(pe, entries.len());
                        index[li] = Some(entries.len());
                        entries.push(Entry {
                            lo: o.lo + 1,
                            hi: o.hi - 1,
                            item: Item::Pseudo { owner: None, parent_entry: Some(pe) },
                            anchor: o.anchor,
                            anchor_desc: o.anchor_desc || pn.edge == EdgeKind::AncestorDescendant,
                        });
                    }
                    OwnerSource::Prefix => {
                        if let Some(&s) = seen_owner.get(&owner) {
                            index[li] = Some(s);
                            continue;
                        }
                        let Occurrence::Real { region, path } = list.owners[owner] else {
                            unreachable!("prefix owners are real")
                        };
                        seen_owner.insert(owner, entries.len());
                        index[li] = Some(entries.len());
                        entries.push(Entry {
                            lo: scale * region.start as u64 + 1,
                            hi: scale * region.end as u64 - 1,
                            item: Item::Pseudo { owner: Some((region, path)), parent_entry: None },
                            anchor: region,
                            anchor_desc: false,
                        });
                    }
                    OwnerSource::None => unreachable!("strict list with pseudo entries"),
                },
            }
        }
        // keep list positions for pseudo owners but order the stream by interval
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&i| (entries[i].lo, std::cmp::Reverse(entries[i].hi)));
        let mut rank = vec![0; entries.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let sorted: Vec<Entry> = order.iter().map(|&i| entries[i]).collect();
        for slot in index.iter_mut().flatten() {
            *slot = rank[*slot];
        }
        stream_of.push(index);
        nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            steps,
            edge: pn.edge,
            entries: sorted,
            cursor: 0,
            stack: Vec::new(),
            leaves_below: Vec::new(),
        });
    }
    // leaves below each node; nodes are in preorder so children follow parents
    for q in (0..nodes.len()).rev() {
        if nodes[q].children.is_empty() {
            nodes[q].leaves_below = vec![q];
        } else {
            let below: Vec<usize> =
                nodes[q].children.iter().flat_map(|&c| nodes[c].leaves_below.clone()).collect();
            nodes[q].leaves_below = below;
        }
    }
    let leaves: Vec<usize> = (0..nodes.len()).filter(|&q| nodes[q].children.is_empty()).collect();
    let leaf_slot = leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut m = Matcher { nodes, advances: 0, solutions: vec![Vec::new(); leaves.len()], leaf_slot };
    m.run();
    stats.advances = m.advances;
    stats.path_solutions = m.solutions.iter().map(|s| s.len() as u64).sum();

    let paths: Vec<Vec<usize>> = leaves.iter().map(|&l| path_to(&m.nodes, l)).collect();
    let joined = merge_path_solutions(m.nodes.len(), &paths, &m.solutions);
    let mut rows: Vec<CandidateRow> =
        joined.iter().map(|a| expand_row(dg, q, t, &m.nodes, a, &table)).collect();
    rows.sort();
    rows.dedup();
    table.rows = rows;
    (table, stats)
}

fn path_to(nodes: &[Node], leaf: usize) -> Vec<usize> {
    let mut path = vec![leaf];
    let mut cur = leaf;
    while let Some(p) = nodes[cur].parent {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

/// Join per-leaf path solutions on the nodes they share. `paths[i]` lists the
/// nodes of leaf `i`'s root path, and each solution in `solutions[i]` gives an
/// entry index for each of those nodes. Returns one entry per node for every
/// consistent combination.
pub fn merge_path_solutions(
    node_count: usize,
    paths: &[Vec<usize>],
    solutions: &[Vec<Vec<usize>>],
) -> Vec<Vec<Option<usize>>> {
    let mut rows: Vec<Vec<Option<usize>>> = vec![vec![None; node_count]];
    let mut covered = vec![false; node_count];
    for (path, sols) in paths.iter().zip(solutions) {
        let shared: Vec<usize> = (0..path.len()).filter(|&i| covered[path[i]]).collect();
        let mut by_key: HashMap<Vec<usize>, Vec<&Vec<usize>>> = HashMap::new();
        for s in sols {
            by_key.entry(shared.iter().map(|&i| s[i]).collect()).or_default().push(s);
        }
        let mut next = Vec::new();
        for r in &rows {
            let key: Vec<usize> = shared.iter().map(|&i| r[path[i]].expect("shared node bound")).collect();
            if let Some(matches) = by_key.get(&key) {
                for s in matches {
                    let mut row = r.clone();
                    for (i, &n) in path.iter().enumerate() {
                        row[n] = Some(s[i]);
                    }
                    next.push(row);
                }
            }
        }
        next.sort();
        next.dedup();
        rows = next;
        for &n in path {
            covered[n] = true;
        }
        if rows.is_empty() {
            break;
        }
    }
    rows
}

fn expand_row(
    dg: &AnnotatedDataGuide,
    q: &QueryTree,
    t: &PrefPathTree,
    nodes: &[Node],
    row: &[Option<usize>],
    table: &PreferenceTable,
) -> CandidateRow {
    let mut binding: Vec<Option<RegionLabel>> = vec![None; q.len()];
    for (id, pn) in t.nodes().iter().enumerate() {
        let e = nodes[id + 1].entries[row[id + 1].expect("every node bound")];
        let m = pn.chain.len();
        let (top, path, filled) = match e.item {
            Item::Real { region, path } => (region, path, m),
            Item::Pseudo { owner: Some((o, path)), .. } => (o, path, m - 1),
            Item::Pseudo { .. } | Item::Root => continue,
        };
        // chain[..filled] ends at `top`
        for j in 0..filled {
            let level = top.level - (filled - 1 - j) as u32;
            binding[pn.chain[j]] = Some(dg.ancestor_at_level(path, top, level));
        }
    }
    let bindings = table.strict_columns.iter().map(|&c| binding[c].expect("strict node bound")).collect();
    let pref_bindings: Vec<Option<RegionLabel>> = table.pref_columns.iter().map(|&c| binding[c]).collect();
    let pref_flags = pref_bindings.iter().map(Option::is_some).collect();
    CandidateRow { bindings, pref_bindings, pref_flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::DocTree;
    use crate::prefpath::assign_lists_for;
    use crate::rewrite::rewrite;
    use crate::samples::{SAMPLE_DOC, SAMPLE_QUERY};

    fn run(xml: &str, query: &str) -> (PreferenceTable, MatchStats) {
        let doc = DocTree::parse(xml).unwrap();
        let dg = AnnotatedDataGuide::build(&doc);
        let q = QueryTree::parse(query).unwrap();
        let t = rewrite(&q).unwrap();
        let lists = assign_lists_for(&dg, &t, &q);
        holistic_match(&dg, &q, &t, &lists)
    }

    fn starts(row: &CandidateRow) -> Vec<u32> {
        row.bindings.iter().map(|r| r.start).collect()
    }

    #[test]
    fn sample_table() {
        let (table, stats) = run(SAMPLE_DOC, SAMPLE_QUERY);
        let flags: Vec<bool> = table.rows.iter().map(|r| r.pref_flags[0]).collect();
        assert_eq!(flags, vec![false, false, true, false]);
        assert_eq!(table.strict_columns, vec![0, 2, 3, 4]);
        assert_eq!(table.pref_columns, vec![1]);
        // the one row with B bound is the second A with its B/C child
        let best = &table.rows[2];
        assert_eq!(best.pref_bindings[0].unwrap().start, 12);
        assert_eq!(starts(best), vec![11, 13, 18, 19]);
        assert!(stats.advances <= 2 * stats.list_entries);
    }

    #[test]
    fn exact_path() {
        let (table, _) = run("<A><B><C/></B><B/><C/></A>", "A/B/C");
        assert!(table.pref_columns.is_empty());
        assert_eq!(table.rows.iter().map(starts).collect::<Vec<_>>(), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn absent_preference_binds_strict_nodes_only() {
        let (table, _) = run("<A><C/></A>", "A[B!/C]");
        assert_eq!(table.len(), 1);
        assert_eq!(starts(&table.rows[0]), vec![1, 2]);
        assert_eq!(table.rows[0].pref_flags, vec![false]);
        assert_eq!(table.rows[0].pref_bindings, vec![None]);
    }

    #[test]
    fn descendant_edge() {
        let (table, _) = run("<R><A><X><B/></X></A><B/></R>", "A//B");
        assert_eq!(table.rows.iter().map(starts).collect::<Vec<_>>(), vec![vec![2, 4]]);
    }

    #[test]
    fn no_match() {
        let (table, _) = run("<A><C/></A>", "A/B");
        assert!(table.is_empty());
    }

    #[test]
    fn merge_join() {
        // node 0 root, 1 shared, 2 and 3 leaves
        let paths = vec![vec![0, 1, 2], vec![0, 1, 3]];
        let sols = vec![vec![vec![0, 0, 0], vec![0, 1, 1]], vec![vec![0, 0, 5], vec![0, 2, 6]]];
        let rows = merge_path_solutions(4, &paths, &sols);
        assert_eq!(rows, vec![vec![Some(0), Some(0), Some(0), Some(5)]]);
        let sols = vec![vec![vec![0, 1, 0]], vec![vec![0, 2, 0]]];
        assert!(merge_path_solutions(4, &paths, &sols).is_empty());
    }
}
