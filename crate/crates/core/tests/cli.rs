use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pitch_momdp::report::read_qtable_csv;
use serde_json::Value;

const FILES: [&str; 4] = ["qtable.csv", "qtable.pgm", "contour_mask.csv", "summary.json"];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pitch-momdp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn default_run_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in FILES {
        let got = fs::read_to_string(out.join(name)).unwrap();
        let want = fs::read_to_string(fixture("default_run").join(name)).unwrap();
        assert_eq!(got, want, "{name} differs from golden copy");
    }
    // staging directory is cleaned up
    assert_eq!(fs::read_dir(&out).unwrap().count(), FILES.len());
}

#[test]
fn missing_contour_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["--contour", "does/not/exist.txt"], &out);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does/not/exist.txt"));
    assert!(!out.exists());
}

#[test]
fn bad_contour_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["--contour", fixture("bad_pitch.txt").to_str().unwrap()], &out);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--gamma", "1.0"][..],
        &["--alpha", "2"],
        &["--obs-noise", "-0.1"],
        &["--reward-combine", "other"],
        &["--passes", "-3"],
    ] {
        let out = dir.path().join("run");
        let o = run(args, &out);
        assert!(!o.status.success(), "{args:?} accepted");
        assert!(!out.exists(), "{args:?} wrote files");
    }
}

#[test]
fn zero_passes_write_zero_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--passes", "0"], dir.path());
    assert!(o.status.success());
    let q = read_qtable_csv(&fs::read_to_string(dir.path().join("qtable.csv")).unwrap()).unwrap();
    assert!(q.iter().all(|(_, _, v)| v == 0.0));
    let pgm = fs::read_to_string(dir.path().join("qtable.pgm")).unwrap();
    assert!(pgm.lines().skip(3).all(|l| l == "0 0 0 0 0 0 0"));
}

#[test]
fn both_contour_forms_train_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["--contour", fixture("notes.txt").to_str().unwrap()], a.path()).status.success());
    assert!(run(&["--contour", fixture("intervals.txt").to_str().unwrap()], b.path()).status.success());
    for name in ["qtable.csv", "qtable.pgm", "contour_mask.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn summary_reports_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "--reward-combine",
            "discounted-second",
            "--seed",
            "7",
            "--obs-noise",
            "0.3",
            "--alpha-schedule",
            "inverse-visit-count",
            "--interaction",
            "step",
            "--passes",
            "9",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let cfg = &s["config"];
    assert_eq!(cfg["reward_combine"], "discounted-second");
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["obs_epsilon"], 0.3);
    assert_eq!(cfg["alpha_schedule"], "inverse-visit-count");
    assert_eq!(cfg["interaction"], "step");
    assert_eq!(s["macro_steps"], 9);
    // 4 + 4 + 1 steps, each worth 0 + 0.5 * 1
    assert_eq!(s["pass_returns"], serde_json::json!([2.0, 2.0, 0.5]));
    assert!(s["nonzero_cells"].as_u64().unwrap() >= s["nonzero_non_contour_cells"].as_u64().unwrap());
}

#[test]
fn csv_round_trips_through_reader() {
    let q = read_qtable_csv(&fs::read_to_string(fixture("default_run/qtable.csv")).unwrap()).unwrap();
    let mut buf = Vec::new();
    pitch_momdp::report::write_qtable_csv(&q, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), fs::read_to_string(fixture("default_run/qtable.csv")).unwrap());
}
