//! Experiment harness: deterministic tables, cache reuse and CLI errors.

use std::fs;
use std::process::Command;

use lidistill::harness::{run_e2e_table, run_lrh_table, run_separation, Backend, ExperimentConfig, Table};

fn small(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        n: 3,
        l: 2,
        depths: vec![1, 2],
        seeds: 2,
        backend: Backend::Oracle,
        out_dir: dir.to_path_buf(),
        separation: vec![3, 4],
        ..ExperimentConfig::default()
    }
}

#[test]
fn e2e_rerun_is_byte_identical_and_resumes_from_cache() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_e2e_table(&small(a.path())).unwrap();
    let other = run_e2e_table(&small(b.path())).unwrap();
    assert_eq!(first.body(), other.body());
    assert_eq!(first.rows.len(), 4);
    for i in 0..first.rows.len() {
        assert_eq!(first.get(i, "error"), Some(""), "{:?}", first.rows[i]);
    }

    // a finished cell is read back, not recomputed
    let cache = fs::read_dir(a.path().join("cache")).unwrap().next().unwrap().unwrap().path();
    let cell = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let mut t = Table::parse(&fs::read_to_string(&cell).unwrap()).unwrap();
    let col = t.column("distill_acc").unwrap();
    t.rows[0][col] = "0.123".into();
    fs::write(&cell, t.to_csv()).unwrap();
    let resumed = run_e2e_table(&small(a.path())).unwrap();
    assert!(resumed.rows.iter().any(|r| r[col] == "0.123"));

    let written = Table::parse(&fs::read_to_string(a.path().join("e2e.csv")).unwrap()).unwrap();
    assert_eq!(written.body(), resumed.body());
    assert!(written.meta_value("config_hash").is_some());
}

#[test]
fn lrh_and_separation_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let lrh = run_lrh_table(&cfg).unwrap();
    assert_eq!(lrh.summary.rows.len(), cfg.depths.len() * cfg.lrh.norms.len() * cfg.seeds);
    let sep = run_separation(&cfg).unwrap();
    assert_eq!(sep.get(1, "negatives"), Some("9"));
    assert_eq!(sep.get(1, "total"), Some("32"));
    assert!(dir.path().join("separation.csv").exists());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lidistill")).args(args).output().unwrap()
}

#[test]
fn cli_reports_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = cli(&["separation", "--set", "n=-1", "--out", out]);
    assert!(!bad.status.success());
    let err = String::from_utf8(bad.stderr).unwrap();
    assert!(err.contains("\"error\":\"config\"") && err.contains("n (line"), "{err}");

    let bad = cli(&["separation", "--set", "bogus=1", "--out", out]);
    assert!(!bad.status.success());

    let bad = cli(&["distill", "--backend", "gpu", "--out", out]);
    assert!(!bad.status.success());

    let ok = cli(&["separation", "--backend", "oracle", "--set", "separation=[3, 4]", "--out", out]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = dir.path().join("separation.csv");
    let report = cli(&["report", csv.to_str().unwrap()]);
    assert!(String::from_utf8(report.stdout).unwrap().contains("| n | total |"));
}

#[test]
fn probes_grow_with_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { ks: vec![2, 5, 20, 80], ..small(dir.path()) };
    let t = run_e2e_table(&cfg).unwrap();
    let probes = |i: usize| t.get(i, "probes").unwrap().parse::<usize>().unwrap();
    for i in 0..t.rows.len() {
        for j in 0..t.rows.len() {
            let same = ["depth", "seed"].iter().all(|c| t.get(i, c) == t.get(j, c));
            let (ki, kj): (usize, usize) = (t.get(i, "k").unwrap().parse().unwrap(), t.get(j, "k").unwrap().parse().unwrap());
            if same && ki < kj {
                assert!(probes(i) <= probes(j), "{:?} vs {:?}", t.rows[i], t.rows[j]);
            }
        }
    }
}
