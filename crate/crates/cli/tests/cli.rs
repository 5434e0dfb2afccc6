use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gait(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gait"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GAIT_THREADS")
        .output()
        .expect("binary runs")
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn three_clusters(dir: &TempDir) {
    let mut s = String::from("2 30\n");
    for i in 0..30 {
        let c = (i % 3) as f64 * 5.0;
        let jitter = (i / 3) as f64 * 0.01;
        s += &format!("{} {}\n", c + jitter, -c + jitter);
    }
    put(dir, "pts", &s);
}

#[test]
fn entropy_of_uniform_on_identity() {
    let d = TempDir::new().unwrap();
    put(&d, "g", "3\n1 0 0\n0 1 0\n0 0 1\n");
    put(&d, "u", "0.333333333333 0.333333333333 0.333333333334\n");
    let o = gait(&["entropy", "--gram", "g", "--dist", "u"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines, ["1.09861228867", "3"]);
}

#[test]
fn entropy_infinite_order() {
    let d = TempDir::new().unwrap();
    put(&d, "g", "2\n1 0.5\n0.5 1\n");
    put(&d, "u", "0.5\n0.5\n");
    let o = gait(&["entropy", "--gram", "g", "--dist", "u", "--alpha", "inf"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let h: f64 = stdout(&o).lines().next().unwrap().parse().unwrap();
    assert!((h - (1.0f64 / 0.75).ln()).abs() < 1e-10);
}

#[test]
fn weights_off_simplex_rejected() {
    let d = TempDir::new().unwrap();
    put(&d, "g", "2\n1 0\n0 1\n");
    put(&d, "u", "0.5 0.6\n");
    let o = gait(&["entropy", "--gram", "g", "--dist", "u"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sum"));
}

#[test]
fn malformed_points_report_line() {
    let d = TempDir::new().unwrap();
    put(&d, "x", "1 3\n0\nnope\n2\n");
    put(&d, "y", "1 1\n0\n");
    let o = gait(&["divergence", "--x", "x", "--y", "y"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("line 3"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn divergence_of_measure_with_itself_is_zero() {
    let d = TempDir::new().unwrap();
    put(&d, "x", "2 3\n0 0\n1 0\n0 2\n");
    let o = gait(&["divergence", "--x", "x", "--y", "x", "--both"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let vals: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 4);
    assert!(vals[0].abs() < 1e-12 && vals[3].abs() < 1e-12);
}

#[test]
fn unknown_flag_and_help() {
    let d = TempDir::new().unwrap();
    let o = gait(&["entropy", "--bogus"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
    let o = gait(&["--help"], d.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("Exit codes"));
}

#[test]
fn bad_thread_env_rejected() {
    let d = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gait"))
        .args(["verify", "--check", "lines"])
        .env("GAIT_THREADS", "zero")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_lines_table() {
    let d = TempDir::new().unwrap();
    let o = gait(&["verify", "--check", "lines", "--lines-n", "400"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi,numeric,analytic,abs_error"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(r[3] < 1e-8, "{r:?}");
    }
}

#[test]
fn verify_injection_writes_records() {
    let d = TempDir::new().unwrap();
    let o = gait(
        &["verify", "--check", "divergence", "--trials", "50", "--inject", "equal-distributions", "--out", "rec.jsonl"],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("min_value"));
    assert!(d.path().join("rec.jsonl.manifest.json").exists());
}

#[test]
fn maxent_trace_and_manifest() {
    let d = TempDir::new().unwrap();
    put(&d, "g", "3\n1 0.9 0\n0.9 1 0\n0 0 1\n");
    let o = gait(&["maxent", "--gram", "g", "--steps", "300", "--out", "p.txt", "--trace", "t.csv"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("step,objective"));
    assert_eq!(trace.lines().count(), 301);
    let p: Vec<f64> = std::fs::read_to_string(d.path().join("p.txt"))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // the isolated element gets more than the near-duplicate pair's members
    assert!(p[2] > p[0] && p[2] > p[1]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("p.txt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "maxent");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["inputs"]["g"].as_str().unwrap().len(), 64);
}

#[test]
fn approx_reproducible_across_threads() {
    let d = TempDir::new().unwrap();
    three_clusters(&d);
    let common =
        ["approx", "--target", "pts", "--m", "4", "--steps", "40", "--batch", "10", "--seed", "7", "--sigma", "2"];
    let mut a: Vec<&str> = common.to_vec();
    a.extend(["--out", "a.txt", "--trace", "a.csv"]);
    let mut b: Vec<&str> = common.to_vec();
    b.extend(["--out", "b.txt", "--trace", "b.csv", "--threads", "3"]);
    assert!(gait(&a, d.path()).status.success());
    assert!(gait(&b, d.path()).status.success());
    let read = |n: &str| std::fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("a.txt"), read("b.txt"));
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn approx_rejects_oversized_m() {
    let d = TempDir::new().unwrap();
    three_clusters(&d);
    let o = gait(&["approx", "--target", "pts", "--m", "31", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn modes_sweep_ends_with_selection() {
    let d = TempDir::new().unwrap();
    three_clusters(&d);
    for method in ["diversity", "birthday"] {
        let o = gait(&["modes", "--points", "pts", "--method", method], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        assert_eq!(text.lines().next(), Some("scale,value,smoothed_d2"));
        assert_eq!(text.lines().count(), 102);
        assert!(text.lines().last().unwrap().starts_with("selected,"));
    }
}

#[test]
fn mi_of_perfect_coupling() {
    let d = TempDir::new().unwrap();
    put(&d, "j", "2 2\n0.5 0\n0 0.5\n");
    let o = gait(&["mi", "--joint", "j"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mi: f64 = text.lines().find_map(|l| l.strip_prefix("I[X;Y] ")).unwrap().parse().unwrap();
    assert!((mi - 2f64.ln()).abs() < 1e-11, "{text}");
    assert!(text.contains("H[X|Y] 0\n"));
}

#[test]
fn barycenter_writes_pgm() {
    let d = TempDir::new().unwrap();
    std::fs::create_dir(d.path().join("imgs")).unwrap();
    put(&d, "imgs/a.pgm", "P2\n# corner\n3 3\n9\n9 0 0\n0 0 0\n0 0 0\n");
    put(&d, "imgs/b.txt", "3\n0 0 0\n0 0 0\n0 0 1\n");
    let o = gait(&["barycenter", "--images", "imgs", "--sigma", "0.3", "--steps", "50", "--out", "bc.pgm"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = std::fs::read_to_string(d.path().join("bc.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n3 3\n255\n"));
}

#[test]
fn barycenter_mixed_sizes_rejected() {
    let d = TempDir::new().unwrap();
    std::fs::create_dir(d.path().join("imgs")).unwrap();
    put(&d, "imgs/a.txt", "2\n1 0\n0 1\n");
    put(&d, "imgs/b.txt", "3\n0 0 0\n0 1 0\n0 0 0\n");
    let o = gait(&["barycenter", "--images", "imgs", "--steps", "5", "--out", "bc.pgm"], d.path());
    assert_eq!(o.status.code(), Some(1));
}
