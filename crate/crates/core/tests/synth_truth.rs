//! Synthetic suites: determinism, planted truth, nesting and threshold
//! monotonicity.

mod common;

use memforecast::eval::confusion;
use memforecast::store::load_memorized_set;
use memforecast::synth::{generate, ground_truth_check, Nesting};
use memforecast::{validate_suite, CheckpointRef, ScoreParams};
use num_rational::Ratio;

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(dir).unwrap().display().to_string(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn generation_is_deterministic_across_worker_counts() {
    let cfg = common::config(30_000, Nesting::Overlap { rho: 0.5 });
    let run = |threads| {
        let dir = tempfile::tempdir().unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate(&cfg, dir.path()).unwrap());
        let f = files(dir.path());
        (dir, f)
    };
    let (_a, one) = run(1);
    let (_b, four) = run(4);
    // manifests embed no paths outside the suite directory
    assert_eq!(one, four);
}

#[test]
fn generated_suite_validates_and_passes_truth_check() {
    for nesting in [
        Nesting::Nested,
        Nesting::Overlap { rho: 0.7 },
        Nesting::Overlap { rho: 0.0 },
    ] {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&common::config(50_000, nesting), dir.path()).unwrap();
        assert_eq!(validate_suite(&g.suite), vec![]);
        let report = ground_truth_check(&g.suite, &g.truth).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(report.passed, "{nesting:?}: {failures:#?}");
        assert!(report.items.iter().any(|i| i.check == "phi"));
    }
}

#[test]
fn truth_check_names_a_tampered_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&common::config(5_000, Nesting::Nested), dir.path()).unwrap();
    let victim = dir.path().join(&g.truth.sets[1].record_file);
    let mut bytes = std::fs::read(&victim).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&victim, bytes).unwrap();
    let report = ground_truth_check(&g.suite, &g.truth).unwrap();
    assert!(!report.passed);
    let name = g.truth.sets[1].record_file.display().to_string();
    assert!(report.failures().any(|i| i.subject.contains(&name)));
}

#[test]
fn nested_checkpoints_have_unit_precision_and_exact_recall() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&common::config(40_000, Nesting::Nested), dir.path()).unwrap();
    let params = g.suite.threshold_default;
    for m in &g.suite.models {
        for w in m.checkpoints.windows(2) {
            let early =
                load_memorized_set(&g.suite, &CheckpointRef::new(&m.name, &w[0].label), &params)
                    .unwrap();
            let late =
                load_memorized_set(&g.suite, &CheckpointRef::new(&m.name, &w[1].label), &params)
                    .unwrap();
            let c = confusion(&early, &late).unwrap();
            assert_eq!(c.precision_exact(), Some(Ratio::from_integer(1)));
            let late_in_support = late.ids().count_below(early.universe_bound());
            assert_eq!(
                c.recall_exact(),
                Some(Ratio::new(early.len(), late_in_support))
            );
        }
    }
}

#[test]
fn extended_threshold_sets_are_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(
        &common::config(40_000, Nesting::Overlap { rho: 0.5 }),
        dir.path(),
    )
    .unwrap();
    let p32 = g.suite.threshold_default;
    let p64 = ScoreParams::extended();
    for (m, c) in g.suite.entries() {
        let r = CheckpointRef::new(&m.name, &c.label);
        let s32 = load_memorized_set(&g.suite, &r, &p32).unwrap();
        let s64 = load_memorized_set(&g.suite, &r, &p64).unwrap();
        assert!(s64.ids().iter().all(|id| s32.contains(id)), "{r}");
        assert!(
            s64.len() < s32.len(),
            "{r}: ablation should drop some sequences"
        );
        let truth = g
            .truth
            .sets
            .iter()
            .find(|s| s.model == m.name && s.checkpoint == c.label)
            .unwrap();
        assert_eq!(
            s64.ids().iter().collect::<Vec<_>>(),
            truth.memorized_extended
        );
    }
}
