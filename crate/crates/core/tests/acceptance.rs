//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use prefq_core::oracle::{non_dominated, to_regions, twig_matches, Oracle};
use prefq_core::prefpath::{assign_lists_for, check_coverage, eval_pref_path};
use prefq_core::samples::{synthetic_forest, SAMPLE_DOC, SAMPLE_QUERY, SYNTHETIC_QUERY};
use prefq_core::selftest::{random_doc, random_query, GenConfig, Rows};
use prefq_core::{
    evaluate, rewrite, AnnotatedDataGuide, DocTree, DominanceMode, PathKey, PrefPathQuery, QueryTree,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sample() -> Outcome {
    let t0 = Instant::now();
    let doc = DocTree::parse(SAMPLE_DOC).map_err(|e| e.to_string())?;
    let dg = AnnotatedDataGuide::build(&doc);
    let q = QueryTree::parse(SAMPLE_QUERY).map_err(|e| e.to_string())?;
    let out = evaluate(&dg, &q, DominanceMode::FlagVector).map_err(|e| e.to_string())?;
    let lists = assign_lists_for(&dg, &out.tree, &q);
    let by_label = |tag: &str| {
        let i = out.tree.tags().iter().position(|t| t == tag).ok_or(format!("no tag {tag}"))?;
        Ok::<_, String>(&lists[i])
    };
    let ta = by_label("A")?;
    let tb = by_label("A/B!")?;
    let tc = by_label("C")?;
    let te = by_label("A/D/E")?;
    ensure(ta.len() == 3, || format!("|TA| = {}", ta.len()))?;
    ensure(te.len() == 3, || format!("|TE| = {}", te.len()))?;
    ensure(tc.len() == 5, || format!("|TC| = {}", tc.len()))?;
    ensure(tb.pattern() == "eebeeeb", || format!("TB pattern {}", tb.pattern()))?;
    ensure(tb.real_count() == 2 && tb.pseudo_count() == 5, || "TB counts".into())?;
    let flags: Vec<bool> = out.table.rows.iter().map(|r| r.pref_flags[0]).collect();
    ensure(flags == [false, false, true, false], || format!("flag column {flags:?}"))?;
    ensure(out.answers.len() == 1 && out.answers[0] == out.table.rows[2], || "skyline is not the flag-1 row".into())?;
    let elapsed = t0.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("4 rows, flags 0010, TB {}, {elapsed:?}", tb.pattern()))
}

struct Corpus {
    trials: usize,
    skipped: usize,
    strict_checked: usize,
}

fn engine_sets(dg: &AnnotatedDataGuide, q: &QueryTree, mode: DominanceMode) -> Result<(Rows, Rows, bool), String> {
    let out = evaluate(dg, q, mode).map_err(|e| e.to_string())?;
    let mut candidates: Rows = out.table.rows.iter().map(|r| out.table.assignment(r)).collect();
    candidates.sort();
    let mut answers: Rows = out.answers.iter().map(|r| out.table.assignment(r)).collect();
    answers.sort();
    // Strict-answer guarantee: once some row satisfies every preference,
    // nothing less may be returned.
    let any_full = out.table.rows.iter().any(|r| r.pref_flags.iter().all(|&f| f));
    let guarantee = !any_full || out.answers.iter().all(|r| r.pref_flags.iter().all(|&f| f));
    Ok((candidates, answers, guarantee))
}

fn oracle_equivalence(seed: u64, trials: usize) -> Result<Corpus, String> {
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Corpus { trials: 0, skipped: 0, strict_checked: 0 };
    while c.trials < trials {
        let alphabet = rng.gen_range(2..=cfg.alphabet);
        let doc = DocTree::from_forest(&random_doc(&mut rng, &cfg, alphabet));
        let text = random_query(&mut rng, &cfg, alphabet);
        let q = QueryTree::parse(&text).map_err(|e| e.to_string())?;
        let Ok(matches) = Oracle::new(&doc, &q).with_limit(cfg.oracle_limit).matches() else {
            c.skipped += 1;
            continue;
        };
        let mut want: Rows = matches.iter().map(|m| to_regions(&doc, m)).collect();
        want.sort();
        let mut want_answers = non_dominated(&q, &want, DominanceMode::FlagVector);
        want_answers.sort();
        let dg = AnnotatedDataGuide::build(&doc);
        let (got, got_answers, guarantee) = engine_sets(&dg, &q, DominanceMode::FlagVector)?;
        let ctx = || format!("seed {seed} trial {} query {text} doc {}", c.trials, doc.to_xml());
        ensure(got == want, || format!("candidates differ: {}", ctx()))?;
        ensure(got_answers == want_answers, || format!("answers differ: {}", ctx()))?;
        ensure(guarantee, || format!("strict-answer guarantee broken: {}", ctx()))?;
        if q.preference_nodes().next().is_some() {
            c.strict_checked += 1;
        }
        c.trials += 1;
    }
    Ok(c)
}

fn exact_degeneration(seed: u64, trials: usize) -> Outcome {
    let cfg = GenConfig { max_preference: 0, ..GenConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nonempty = 0;
    for trial in 0..trials {
        let alphabet = rng.gen_range(2..=cfg.alphabet);
        let doc = DocTree::from_forest(&random_doc(&mut rng, &cfg, alphabet));
        let text = random_query(&mut rng, &cfg, alphabet);
        let q = QueryTree::parse(&text).map_err(|e| e.to_string())?;
        if q.preference_nodes().next().is_some() {
            continue;
        }
        let want: BTreeSet<Vec<_>> = twig_matches(&q, &doc).into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        let dg = AnnotatedDataGuide::build(&doc);
        let (got, answers, _) = engine_sets(&dg, &q, DominanceMode::FlagVector)?;
        let got: BTreeSet<_> = got.into_iter().collect();
        ensure(got == want, || format!("trial {trial}: {text} on {}", doc.to_xml()))?;
        ensure(answers.len() == got.len(), || format!("trial {trial}: skyline dropped exact rows"))?;
        nonempty += usize::from(!got.is_empty());
    }
    Ok(format!("{trials} preference-free trials, {nonempty} with matches"))
}

fn rewriting(seed: u64, trials: usize) -> Outcome {
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let text = random_query(&mut rng, &cfg, cfg.alphabet);
        let q = QueryTree::parse(&text).map_err(|e| e.to_string())?;
        let t = rewrite(&q).map_err(|e| format!("{text}: {e}"))?;
        t.check_well_formed(&q).map_err(|e| format!("{text}: {e}"))?;
        let steps: usize = t.nodes().iter().map(|n| n.chain.len()).sum();
        ensure(steps == q.len(), || format!("{text}: {steps} steps for {} nodes", q.len()))?;
        for n in t.nodes() {
            let prefs: Vec<usize> = n.chain.iter().enumerate().filter(|(_, &x)| q.node(x).is_preference).map(|(i, _)| i).collect();
            ensure(prefs.is_empty() || prefs == [n.chain.len() - 1], || format!("{text}: tag {}", n.tag))?;
        }
    }
    Ok(format!("{trials} queries"))
}

fn dataguide(seed: u64, trials: usize) -> Outcome {
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let alphabet = rng.gen_range(1..=cfg.alphabet);
        let doc = DocTree::from_forest(&random_doc(&mut rng, &cfg, alphabet));
        let dg = AnnotatedDataGuide::build(&doc);
        let paths: HashSet<Vec<String>> = (0..doc.len()).map(|i| doc.label_path(i)).collect();
        ensure(dg.key_count() == paths.len(), || format!("trial {trial}: {} keys, {} paths", dg.key_count(), paths.len()))?;
        let mut total = 0;
        for (_, key, list) in dg.entries() {
            ensure(paths.contains(key.labels()), || format!("trial {trial}: stray key {key}"))?;
            ensure(list.windows(2).all(|w| w[0].start < w[1].start), || format!("trial {trial}: {key} unsorted"))?;
            total += list.len();
        }
        ensure(total == doc.len(), || format!("trial {trial}: lists hold {total} of {} nodes", doc.len()))?;
        let saved = dg.save_index();
        let back = AnnotatedDataGuide::load_index(&saved).map_err(|e| e.to_string())?;
        ensure(back.save_index() == saved, || format!("trial {trial}: save/load changed the index"))?;
        let same = dg.entries().zip(back.entries()).all(|(a, b)| a.1 == b.1 && a.2 == b.2);
        ensure(same && back.key_count() == dg.key_count(), || format!("trial {trial}: entries differ after load"))?;
    }
    Ok(format!("{trials} documents"))
}

fn coverage(seed: u64, trials: usize) -> Outcome {
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["A", "B", "C", "D", "E", "F"];
    let mut pseudos = 0;
    for trial in 0..trials {
        let alphabet = rng.gen_range(2..=cfg.alphabet);
        let doc = DocTree::from_forest(&random_doc(&mut rng, &cfg, alphabet));
        let dg = AnnotatedDataGuide::build(&doc);
        let keys: Vec<PathKey> = dg.entries().map(|(_, k, _)| k.clone()).collect();
        for _ in 0..5 {
            // Mostly real paths, sometimes with a random tail.
            let base = &keys[rng.gen_range(0..keys.len())];
            let cut = rng.gen_range(0..base.len());
            let mut steps: Vec<String> = base.labels()[..cut].to_vec();
            if rng.gen_bool(0.2) {
                steps.push(labels[rng.gen_range(0..alphabet)].to_string());
            }
            steps.push(labels[rng.gen_range(0..alphabet)].to_string());
            let p = PrefPathQuery { steps, last_is_preference: true };
            let list = eval_pref_path(&dg, &p);
            check_coverage(&dg, &list).map_err(|e| format!("trial {trial}: {p}: {e}\n{}", doc.to_xml()))?;
            pseudos += list.pseudo_count();
        }
    }
    Ok(format!("{} paths, {pseudos} pseudo entries", trials * 5))
}

fn performance() -> Outcome {
    let xml = DocTree::from_forest(&synthetic_forest(100_000, 42, 8)).to_xml();
    let t0 = Instant::now();
    let doc = DocTree::parse(&xml).map_err(|e| e.to_string())?;
    let dg = AnnotatedDataGuide::build(&doc);
    let index_time = t0.elapsed();
    ensure(doc.len() == 100_000, || format!("document has {} elements", doc.len()))?;
    let q = QueryTree::parse(SYNTHETIC_QUERY).map_err(|e| e.to_string())?;
    ensure(q.len() == 6, || "query is not six nodes".into())?;
    let t1 = Instant::now();
    let out = evaluate(&dg, &q, DominanceMode::FlagVector).map_err(|e| e.to_string())?;
    let query_time = t1.elapsed();
    let s = out.stats;
    ensure(index_time < Duration::from_secs(10), || format!("indexing took {index_time:?}"))?;
    ensure(query_time < Duration::from_secs(2), || format!("query took {query_time:?}"))?;
    ensure(s.advances <= 2 * s.list_entries, || format!("{} advances over {} entries", s.advances, s.list_entries))?;
    ensure(!out.answers.is_empty(), || "query found nothing".into())?;
    Ok(format!(
        "index {index_time:?}, query {query_time:?}, {} advances / {} entries, {} candidates",
        s.advances,
        s.list_entries,
        out.table.len()
    ))
}

fn main() -> ExitCode {
    const TRIALS: usize = 1000;
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Outcome| {
        match &r {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why})");
            }
        }
    };
    report(1, "sample reproduction", sample());
    let t0 = Instant::now();
    let corpus = oracle_equivalence(2024, TRIALS);
    let elapsed = t0.elapsed();
    let c2 = match &corpus {
        Ok(c) if elapsed < Duration::from_secs(60) => {
            Ok(format!("{} trials, {} oracle-skipped, 0 counterexamples, {elapsed:?}", c.trials, c.skipped))
        }
        Ok(_) => Err(format!("took {elapsed:?}")),
        Err(e) => Err(e.clone()),
    };
    report(2, "oracle equivalence", c2);
    report(3, "exact-query degeneration", exact_degeneration(2025, TRIALS));
    let c4 = match &corpus {
        Ok(c) => Ok(format!("{} preference trials checked", c.strict_checked)),
        Err(e) => Err(e.clone()),
    };
    report(4, "strict-answer guarantee", c4);
    report(5, "rewriting well-formedness", rewriting(2026, 5 * TRIALS));
    report(6, "dataguide correctness", dataguide(2027, TRIALS));
    report(7, "coverage contract", coverage(2028, TRIALS));
    report(8, "performance sanity", performance());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
