//! Keep only candidate rows no other row beats on preference flags.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::holistic::{CandidateRow, PreferenceTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub enum DominanceMode {
    /// Compare preference flags only.
    #[default]
    FlagVector,
    /// Compare flags only between rows with identical strict bindings.
    StrictFieldsEqual,
}

impl fmt::Display for DominanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DominanceMode::FlagVector => "flags",
            DominanceMode::StrictFieldsEqual => "strict-equal",
        })
    }
}

impl FromStr for DominanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flags" => Ok(DominanceMode::FlagVector),
            "strict-equal" => Ok(DominanceMode::StrictFieldsEqual),
            other => Err(format!("unknown dominance mode '{other}' (expected flags or strict-equal)")),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("rows have different column layouts ({left} vs {right} preference columns)")]
pub struct ColumnMismatch {
    pub left: usize,
    pub right: usize,
}

fn flags_dominate(p: &[bool], q: &[bool]) -> bool {
    let mut strict = false;
    for (&a, &b) in p.iter().zip(q) {
        if b && !a {
            return false;
        }
        strict |= a && !b;
    }
    strict
}

pub fn dominates(p: &CandidateRow, q: &CandidateRow, mode: DominanceMode) -> Result<bool, ColumnMismatch> {
    if p.pref_flags.len() != q.pref_flags.len() || p.bindings.len() != q.bindings.len() {
        return Err(ColumnMismatch { left: p.pref_flags.len(), right: q.pref_flags.len() });
    }
    if mode == DominanceMode::StrictFieldsEqual && p.bindings != q.bindings {
        return Ok(false);
    }
    Ok(flags_dominate(&p.pref_flags, &q.pref_flags))
}

/// Non-dominated rows in input order.
///
/// Rows sharing a flag vector (and, in strict mode, bindings) stand or fall
/// together, so the block-nested loop runs over distinct groups.
pub fn skyline_filter(t: &PreferenceTable, mode: DominanceMode) -> Vec<CandidateRow> {
    type Group<'a> = (Option<&'a [crate::doc::RegionLabel]>, &'a [bool]);
    fn key(r: &CandidateRow, mode: DominanceMode) -> Group<'_> {
        let b = match mode {
            DominanceMode::FlagVector => None,
            DominanceMode::StrictFieldsEqual => Some(r.bindings.as_slice()),
        };
        (b, r.pref_flags.as_slice())
    }
    let mut distinct: Vec<Group<'_>> = Vec::new();
    let mut seen: HashMap<Group<'_>, usize> = HashMap::new();
    for r in &t.rows {
        let k = key(r, mode);
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(k) {
            e.insert(distinct.len());
            distinct.push(k);
        }
    }
    // groups only compete with groups of equal bindings
    let mut partitions: HashMap<Option<&[crate::doc::RegionLabel]>, Vec<usize>> = HashMap::new();
    for (i, &(b, _)) in distinct.iter().enumerate() {
        partitions.entry(b).or_default().push(i);
    }
    let mut survivors = Vec::new();
    for members in partitions.values() {
        // window of groups not dominated so far
        let mut window: Vec<usize> = Vec::new();
        for &i in members {
            let f = distinct[i].1;
            if window.iter().any(|&w| flags_dominate(distinct[w].1, f)) {
                continue;
            }
            window.retain(|&w| !flags_dominate(f, distinct[w].1));
            window.push(i);
        }
        survivors.extend(window);
    }
    let mut keep = vec![false; distinct.len()];
    for w in survivors {
        keep[w] = true;
    }
    t.rows.iter().filter(|r| keep[seen[&key(r, mode)]]).cloned().collect()
}
