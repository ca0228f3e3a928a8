//! End-to-end checks of the command line driver.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use motionbias_core::manifest::{load_manifest, ImageVariant};
use motionbias_core::motion::SeverityCategory;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motionbias"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn prepared(dir: &Path, seed: &str) -> std::path::PathBuf {
    let data = dir.join("data");
    ok(&["phantom", "--count", "16", "--size", "32", "--seed", seed, "--out", s(&data)]);
    ok(&["split", "--manifest", s(&data), "--seed", seed]);
    ok(&["corrupt", "--manifest", s(&data), "--seed", seed, "--threads", "2"]);
    data
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn phantom_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["phantom", "--count", "16", "--size", "64", "--seed", "7", "--out", s(&a)]);
    ok(&["phantom", "--count", "16", "--size", "64", "--seed", "7", "--out", s(&b)]);
    let ta = tree_bytes(&a);
    assert_eq!(ta.len(), 16 * 3 + 1);
    assert_eq!(ta, tree_bytes(&b));
}

#[test]
fn odd_size_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["phantom", "--count", "1", "--size", "33", "--out", s(dir.path())]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not divisible by 4"), "{err}");
}

#[test]
fn corrupt_writes_both_variants_and_keeps_minimal_clean() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "5");
    let path = data.join("manifest.json");
    let m = load_manifest(&path).unwrap();
    let mut minimal = 0;
    for (i, case) in m.cases.iter().enumerate() {
        assert!(case.files.skull_image.is_some() && case.files.motion_image.is_some());
        let skull = m.load_case(&data, i, ImageVariant::Skull).unwrap();
        let motion = m.load_case(&data, i, ImageVariant::Motion).unwrap();
        let orig = m.load_case(&data, i, ImageVariant::Original).unwrap();
        assert_eq!(motion.lesion_mask, orig.lesion_mask);
        if case.severity == Some(SeverityCategory::Minimal) {
            minimal += 1;
            for (a, b) in skull.image.data().iter().zip(motion.image.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
    assert_eq!(minimal, 4);

    // same seed again -> identical corrupted images
    let before = tree_bytes(&data);
    ok(&["corrupt", "--manifest", s(&data), "--seed", "5"]);
    assert_eq!(before, tree_bytes(&data));
}

#[test]
fn corrupt_without_split_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["phantom", "--count", "4", "--size", "32", "--out", s(dir.path())]);
    let out = run(&["corrupt", "--manifest", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("severity"));
}

#[test]
fn run_and_report_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "9");
    let runs = dir.path().join("runs");
    ok(&["run", "--manifest", s(&data), "--out", s(&runs), "--epochs", "1", "--seed", "9"]);
    let report = dir.path().join("report");
    ok(&["report", "--runs", s(&runs), "--out", s(&report)]);
    let lines = |name: &str| fs::read_to_string(report.join(name)).unwrap().lines().count();
    assert_eq!(lines("per_category.csv"), 1 + 4);
    assert_eq!(lines("pairwise.csv"), 1 + 4);
    assert_eq!(lines("summary.csv"), 1 + 5);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["arms"].as_array().unwrap().len(), 5);

    fs::remove_dir_all(runs.join("shuffled_skull_motion")).unwrap();
    let out = run(&["report", "--runs", s(&runs), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shuffled_skull_motion"));
}

#[test]
fn train_single_arm() {
    let dir = tempfile::tempdir().unwrap();
    let data = prepared(dir.path(), "2");
    let runs = dir.path().join("runs");
    ok(&[
        "train", "--manifest", s(&data), "--arm", "c_SM", "--out", s(&runs), "--epochs", "1", "--batch-size", "4",
    ]);
    assert!(runs.join("curriculum_skull_motion/checkpoint/checkpoint.json").is_file());
    assert!(!runs.join("shuffled_skull_clean").exists());
    let out = run(&["train", "--manifest", s(&data), "--arm", "c_SM", "--out", s(&runs), "--batch-size", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let out = run(&["split", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["--config", "/nonexistent/cfg.json", "phantom", "--count", "1", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["phantom", "--count", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"phantom": {"size": 40}}"#).unwrap();
    let data = dir.path().join("d");
    ok(&["--config", s(&cfg), "phantom", "--count", "2", "--out", s(&data)]);
    let m = load_manifest(data.join("manifest.json")).unwrap();
    assert_eq!(m.phantom.unwrap().size, 40);
    assert_eq!(m.load_case(&data, 0, ImageVariant::Original).unwrap().image.shape(), (40, 40));
}

#[test]
fn import_text_slice() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    fs::write(&csv, "0,1\n2,3\n").unwrap();
    let out = dir.path().join("s.mrt");
    ok(&["import", "--input", s(&csv), "--output", s(&out)]);
    let img = motionbias_core::tensor_io::read_image(&out).unwrap();
    assert_eq!(img.data(), &[0.0, 1.0, 2.0, 3.0]);
    let bad = run(&["import", "--input", s(&csv), "--output", s(&out), "--height", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}
