use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memforecast::fixture::{worked_examples, EXAMPLE_CONT_LEN, EXAMPLE_PROMPT_LEN};
use memforecast::scorer::write_token_file;
use memforecast::store::read_memorized_set;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_memforecast");

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synth_small.json")
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("MEMFORECAST_OUT")
        .output()
        .unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = run(cwd, args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--bogus"][..], &[], &["grid", "--nope"], &["recommend"]] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn analysis_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["validate", "--suite", "absent.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
    let out = run(
        dir.path(),
        &["predict", "--predictor", "99B", "--out-dir", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixture_prediction_reports_published_values() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "predict",
            "--fixture",
            "pythia",
            "--predictor",
            "70M@final",
            "--target",
            "12B@final",
            "--out-dir",
            "o",
        ],
    );
    let r = json(dir.path().join("o/prediction.json"));
    assert_eq!(r["precision"], 0.956);
    assert_eq!(r["recall"], 0.197);
    let s = ok(
        dir.path(),
        &[
            "--summary",
            "predict",
            "--predictor",
            "70M",
            "--out-dir",
            "o",
        ],
    );
    assert!(s.contains("precision 0.956, recall 0.197"), "{s}");
}

#[test]
fn zero_budget_is_infeasible_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(
        dir.path(),
        &["recommend", "--budget", "0", "--out-dir", "o"],
    );
    assert!(s.contains("\"infeasible\""), "{s}");
}

#[test]
fn recommendation_names_smallest_sufficient_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let budget = (6u128 * 6_900_000_000 * 146_000_000 * 2048).to_string();
    ok(
        dir.path(),
        &[
            "recommend",
            "--budget",
            &budget,
            "--min-recall",
            "0.9",
            "--out-dir",
            "o",
        ],
    );
    let r = json(dir.path().join("o/recommendation.json"));
    assert_eq!(r["status"], "infeasible");
    assert_eq!(r["best_affordable"]["model"], "6.9B");
    assert_eq!(r["suggested"]["model"], "12B");
    assert_eq!(r["suggested"]["checkpoint"], "126M");
    assert_eq!(r["suggested"]["recall"], 0.916);
}

#[test]
fn score_then_sets_finds_the_extractible_example() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = dir.path().join("table.mtok");
    write_token_file(
        &tokens,
        EXAMPLE_PROMPT_LEN,
        EXAMPLE_CONT_LEN,
        &worked_examples(),
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "score",
            "table.mtok",
            "--model",
            "toy",
            "--checkpoint",
            "final",
            "--out-dir",
            "o",
        ],
    );
    ok(
        dir.path(),
        &[
            "--threshold",
            "10",
            "sets",
            "o/toy__final.mrec",
            "--out-dir",
            "o",
        ],
    );
    let set = read_memorized_set(dir.path().join("o/toy__final.n10.mset")).unwrap();
    assert_eq!(set.ids().iter().collect::<Vec<_>>(), vec![3]);
    assert_eq!(set.universe_bound(), 4);
    // at N = 3 the third example also qualifies
    ok(
        dir.path(),
        &[
            "--threshold",
            "3",
            "sets",
            "o/toy__final.mrec",
            "--out-dir",
            "o",
        ],
    );
    let set = read_memorized_set(dir.path().join("o/toy__final.n3.mset")).unwrap();
    assert_eq!(set.ids().iter().collect::<Vec<_>>(), vec![2, 3]);
}

fn analyse(cwd: &Path, out: &str, threads: &str) -> Vec<(String, Vec<u8>)> {
    let suite = "suite/suite.json";
    let common = ["--threads", threads, "--out-dir", out];
    let cmds: Vec<Vec<&str>> = vec![
        vec!["validate", "--suite", suite],
        vec!["check", "--suite", suite],
        vec!["correlate", "--suite", suite],
        vec!["grid", "--suite", suite, "--target", "12B"],
        vec!["frontier", "--suite", suite],
        vec![
            "recommend",
            "--suite",
            suite,
            "--budget",
            "1e21",
            "--min-recall",
            "0.5",
        ],
        vec!["predict", "--suite", suite, "--predictor", "1.4B@10K"],
        vec![
            "distribution",
            "--suite",
            suite,
            "--ref",
            "12B",
            "--tail-min",
            "0",
        ],
        vec!["sets", "--suite", suite],
        vec!["compare-suites", "--suite-a", suite, "--suite-b", suite],
        vec!["--threshold", "64", "correlate", "--suite", suite],
    ];
    for c in cmds {
        let mut args = c.clone();
        args.extend(common);
        ok(cwd, &args);
    }
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(cwd.join(out))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synthetic_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    ok(
        dir.path(),
        &[
            "synth",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            "suite",
        ],
    );
    let a = analyse(dir.path(), "a", "1");
    let b = analyse(dir.path(), "b", "4");
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "check.json",
        "correlation.csv",
        "grid.csv",
        "frontier.csv",
        "histogram.csv",
        "comparison.csv",
    ] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    let check = json(dir.path().join("a/check.json"));
    assert_eq!(check["passed"], true);
    let comparison = fs::read_to_string(dir.path().join("a/comparison.csv")).unwrap();
    assert!(
        comparison.lines().skip(1).all(|l| l.ends_with(",0")),
        "{comparison}"
    );
}

#[test]
fn reports_stay_inside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    ok(
        dir.path(),
        &[
            "synth",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            "suite",
        ],
    );
    let before: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    analyse(dir.path(), "out", "2");
    ok(dir.path(), &["grid", "--out-dir", "out"]);
    let mut after: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    after.retain(|n| n != "out");
    assert_eq!(before.len(), after.len());
    let out = run(
        dir.path(),
        &[
            "score",
            "x.mtok",
            "--model",
            "m",
            "--checkpoint",
            "c",
            "--output",
            "../escape.mrec",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("escape.mrec").exists());
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["grid"])
        .current_dir(dir.path())
        .env("MEMFORECAST_OUT", "envout")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("envout/grid.csv").exists());
}

#[test]
fn tampered_suite_fails_check_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    ok(
        dir.path(),
        &[
            "synth",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            "suite",
        ],
    );
    let victim = dir.path().join("suite/records/1.4B__10K.mrec");
    let mut bytes = fs::read(&victim).unwrap();
    let i = bytes.len() - 40;
    bytes[i] ^= 1;
    fs::write(&victim, bytes).unwrap();
    for cmd in ["check", "validate"] {
        let out = run(
            dir.path(),
            &[cmd, "--suite", "suite/suite.json", "--out-dir", "o"],
        );
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("1.4B__10K.mrec"), "{cmd}: {err}");
    }
}
