//! XML preference queries over a region-encoded strong DataGuide.
//!
//! A query is a twig pattern whose nodes marked `!` are optional: matches
//! binding them are preferred over matches that do not. Evaluation rewrites
//! the query into path queries, builds an occurrence list per path from the
//! index, runs a holistic twig join and keeps the non-dominated rows.
//!
//! ```
//! use prefq_core::{evaluate, AnnotatedDataGuide, DocTree, DominanceMode, QueryTree};
//!
//! let doc = DocTree::parse("<A><B><C/></B><D/></A><A><C/><D/></A>").unwrap();
//! let index = AnnotatedDataGuide::build(&doc);
//! let query = QueryTree::parse("A[B!/C]/D").unwrap();
//! let out = evaluate(&index, &query, DominanceMode::FlagVector).unwrap();
//! assert_eq!(out.table.len(), 2);
//! assert_eq!(out.answers.len(), 1);
//! assert_eq!(out.answers[0].pref_flags, vec![true]);
//! ```

pub mod dataguide;
pub mod doc;
pub mod engine;
pub mod holistic;
pub mod oracle;
pub mod prefpath;
pub mod query;
pub mod rewrite;
pub mod samples;
pub mod selftest;
pub mod skyline;

use thiserror::Error;

pub use dataguide::{AnnotatedDataGuide, IndexError, PathId, PathKey};
pub use doc::{is_ancestor, is_parent, DocError, DocTree, Element, RegionLabel};
pub use engine::{evaluate, QueryOutcome, Timings};
pub use holistic::{CandidateRow, MatchStats, PreferenceTable};
pub use prefpath::{Occurrence, OccurrenceList};
pub use query::{EdgeKind, QueryNodeId, QueryParseError, QueryTree, QueryWarning};
pub use rewrite::{decompose, rewrite, PartitionTree, PrefPathQuery, PrefPathTree, RewriteError};
pub use skyline::{dominates, skyline_filter, DominanceMode};

/// Any failure of the library's entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Query(#[from] QueryParseError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}
