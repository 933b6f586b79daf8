//! Small fixed inputs used by tests, benches and the CLI documentation.

/// Three `A` records: the first without `B`, the second with one `B` and a
/// `D/E` branch, the third with a `B` but no `D`.
pub const SAMPLE_DOC: &str = "<A><C/><D><E/><E/></D></A>\
<A><B><C/></B><C/><D><E/></D></A>\
<A><C/><B><C/></B></A>";

/// Prefer `A` records whose `C` sits under a `B`, requiring a `D/E` branch.
pub const SAMPLE_QUERY: &str = "/A[B!/C]/D/E";

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doc::Element;

/// A six-step preference query that finds work in [`synthetic_forest`] output.
pub const SYNTHETIC_QUERY: &str = "A[B!/C]/D[E!]/F";

/// Deterministic forest of exactly `elements` nodes over labels `A`..`F`.
///
/// Records are `A` elements holding a few random subtrees each, at most
/// `max_depth` levels deep.
pub fn synthetic_forest(elements: usize, seed: u64, max_depth: usize) -> Vec<Element> {
    const LABELS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = elements;
    let mut forest = Vec::new();
    fn grow(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize, max_depth: usize) -> Vec<Element> {
        let mut kids = Vec::new();
        if depth >= max_depth {
            return kids;
        }
        let want = rng.gen_range(0..=4usize);
        for _ in 0..want {
            if *budget == 0 {
                break;
            }
            *budget -= 1;
            let label = LABELS[rng.gen_range(0..LABELS.len())];
            let sub = grow(rng, budget, depth + 1, max_depth);
            kids.push(Element::new(label, sub));
        }
        kids
    }
    while budget > 0 {
        budget -= 1;
        let kids = grow(&mut rng, &mut budget, 1, max_depth);
        forest.push(Element::new("A", kids));
    }
    forest
}
