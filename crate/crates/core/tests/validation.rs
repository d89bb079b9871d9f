//! Manifest validation against generated suites.

mod common;

use memforecast::synth::{generate, Nesting};
use memforecast::{validate_suite, Suite, ViolationKind};

fn suite() -> (tempfile::TempDir, Suite) {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&common::config(2_000, Nesting::Nested), dir.path()).unwrap();
    let s = Suite::load(&g.manifest).unwrap();
    (dir, s)
}

#[test]
fn generated_manifest_round_trips() {
    let (dir, s) = suite();
    assert_eq!(validate_suite(&s), vec![]);
    assert_eq!(s.base_dir, dir.path());
}

#[test]
fn non_monotone_checkpoints_are_reported() {
    let (_dir, mut s) = suite();
    s.models[2].checkpoints.swap(1, 2);
    let v = validate_suite(&s);
    assert!(
        v.iter()
            .any(|v| v.kind == ViolationKind::NonMonotoneCheckpoints),
        "{v:?}"
    );
    assert!(v
        .iter()
        .any(|v| v.to_string().contains("non-monotone checkpoints")));
}

#[test]
fn missing_record_file_is_reported() {
    let (dir, s) = suite();
    let victim = dir.path().join(&s.models[0].checkpoints[0].record_file);
    std::fs::remove_file(&victim).unwrap();
    let v = validate_suite(&s);
    let hit = v
        .iter()
        .find(|v| v.kind == ViolationKind::MissingFile)
        .unwrap();
    assert!(hit.to_string().contains("missing file"));
    assert!(hit
        .to_string()
        .contains(&victim.file_name().unwrap().to_string_lossy().to_string()));
}

#[test]
fn header_mismatch_is_reported() {
    let (dir, s) = suite();
    let a = dir.path().join(&s.models[0].checkpoints[0].record_file);
    let b = dir.path().join(&s.models[0].checkpoints[1].record_file);
    std::fs::copy(&b, &a).unwrap();
    let v = validate_suite(&s);
    assert!(!v.is_empty());
}
