//! Shared workloads for the benchmarks.

use prefq_core::samples::synthetic_forest;
use prefq_core::{AnnotatedDataGuide, DocTree};

pub const SEED: u64 = 42;
pub const MAX_DEPTH: usize = 8;

pub fn document(elements: usize) -> DocTree {
    DocTree::from_forest(&synthetic_forest(elements, SEED, MAX_DEPTH))
}

pub fn index(elements: usize) -> AnnotatedDataGuide {
    AnnotatedDataGuide::build(&document(elements))
}

/// Queries of growing shape, all over the synthetic label set.
pub const QUERIES: [(&str, &str); 4] = [
    ("path", "A/D/F"),
    ("twig", "A[B]/D/F"),
    ("one_pref", "A[B!/C]/D/F"),
    ("two_pref", prefq_core::samples::SYNTHETIC_QUERY),
];
