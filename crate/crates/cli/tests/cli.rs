use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cvtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of the named matrix block in `print-model` output.
fn matrix(text: &str, name: &str) -> Vec<Vec<f64>> {
    let mut lines = text
        .lines()
        .skip_while(|l| !l.starts_with(&format!("{name} ")));
    let header = lines.next().expect("block present");
    let rows: usize = header
        .split(' ')
        .nth(1)
        .unwrap()
        .split('x')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    lines
        .take(rows)
        .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn diagonal(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter().enumerate().map(|(i, r)| r[i]).collect()
}

fn ids(path: &Path) -> BTreeSet<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn usage_errors_exit_two() {
    let o = cvtrack(&["track", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(cvtrack(&[]).status.code(), Some(2));
    assert_eq!(
        cvtrack(&["print-model", "--param", "xyz"]).status.code(),
        Some(2)
    );
    assert_eq!(cvtrack(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = dir.path().join("out.txt");
    let o = cvtrack(&[
        "track",
        "--detections",
        missing.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        cvtrack(&["print-model", "--dt", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn print_model_unit_q_diagonal() {
    let o = cvtrack(&["print-model", "--param", "cxcywh", "--dt", "1"]);
    assert!(o.status.success());
    let q = matrix(&stdout(&o), "Q");
    assert_eq!(diagonal(&q), vec![0.25, 0.25, 1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn per_axis_sigma_list_overrides_scalar() {
    for args in [
        ["--sigma-meas", "1,2,3,4", "--sigma-meas", "7"],
        ["--sigma-meas", "7", "--sigma-meas", "1,2,3,4"],
    ] {
        let mut full = vec!["print-model"];
        full.extend(args);
        let r = matrix(&stdout(&cvtrack(&full)), "R");
        assert_eq!(diagonal(&r), vec![1.0, 4.0, 9.0, 16.0]);
    }
    let r = matrix(
        &stdout(&cvtrack(&["print-model", "--sigma-meas", "3"])),
        "R",
    );
    assert_eq!(diagonal(&r), vec![9.0; 4]);
}

#[test]
fn print_model_other_layouts() {
    let o = cvtrack(&["print-model", "--param", "rw", "--dt", "0.5"]);
    assert_eq!(diagonal(&matrix(&stdout(&o), "Q")), vec![0.5; 4]);
    let o = cvtrack(&["print-model", "--param", "cxcyha"]);
    assert_eq!(matrix(&stdout(&o), "F").len(), 8);
}

#[test]
fn verify_q_passes() {
    let o = cvtrack(&["verify-q", "--trials", "200000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("max relative error"));
}

#[test]
fn consistency_exit_codes() {
    let o = cvtrack(&["consistency", "--runs", "200", "--steps", "30"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = cvtrack(&[
        "consistency",
        "--runs",
        "200",
        "--steps",
        "30",
        "--q-scale",
        "0.01",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn noiseless_simulation_tracks_to_two_ids() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("det.txt");
    let res = dir.path().join("res.txt");
    let d = det.to_str().unwrap();
    let r = res.to_str().unwrap();
    let o = cvtrack(&[
        "simulate",
        "--steps",
        "20",
        "--targets",
        "2",
        "--seed",
        "3",
        "--output",
        d,
        "--sigma-process",
        "0",
        "--sigma-meas",
        "0",
    ]);
    assert!(o.status.success());
    assert!(cvtrack(&["track", "--detections", d, "--output", r])
        .status
        .success());
    assert_eq!(ids(&res).len(), 2);
}

#[test]
fn simulate_and_track_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    for name in ["a", "b"] {
        let det = p(&format!("{name}.det"));
        let truth = p(&format!("{name}.gt"));
        let o = cvtrack(&[
            "simulate",
            "--steps",
            "40",
            "--targets",
            "6",
            "--seed",
            "11",
            "--output",
            &det,
            "--truth",
            &truth,
            "--drop-prob",
            "0.1",
        ]);
        assert!(o.status.success());
        let o = cvtrack(&[
            "track",
            "--detections",
            &det,
            "--output",
            &p(&format!("{name}.res")),
        ]);
        assert!(o.status.success());
    }
    for ext in ["det", "gt", "res"] {
        assert_eq!(
            fs::read(p(&format!("a.{ext}"))).unwrap(),
            fs::read(p(&format!("b.{ext}"))).unwrap(),
            "{ext} differs"
        );
    }
    assert_eq!(ids(Path::new(&p("a.gt"))).len(), 6);
}
