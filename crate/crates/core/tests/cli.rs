use std::path::Path;
use std::process::{Command, Output};

use covlab::format::{covering_from_json, covering_to_json, BuildConfig};

fn covlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covlab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn build_default(dir: &Path) -> String {
    let cfg = write(dir, "config.json", &BuildConfig::default().to_json());
    let out = dir.join("covering.json").to_str().unwrap().to_string();
    let o = covlab(&["build", &cfg, "--output", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn norm_command() {
    let dir = tempfile::tempdir().unwrap();
    let e1 = write(dir.path(), "unit_e1.txt", "# e_1\n1 1\n");
    let zero = write(dir.path(), "zero.txt", "");
    let o = covlab(&["norm", "--kind", "m", "--M", "8", "--vec", &e1]);
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((v - (8.0f64 / 9.0).sqrt()).abs() < 1e-15);
    let o = covlab(&["norm", "--kind", "sup", "--vec", &zero]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0");
    let o = covlab(&["norm", "--kind", "m", "--M", "1", "--vec", &e1]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("M must exceed 2"));
    let bad = write(dir.path(), "bad.txt", "1 1\n\n2 one\n");
    let o = covlab(&["norm", "--kind", "sup", "--vec", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn probe_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = covlab(&["probe", "c0", "--n", "20", "--delta", "0.1"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let d = r["dist_e1"].as_array().unwrap();
    assert_eq!(d.len(), 20);
    assert!(d.iter().all(|x| x.as_f64() == Some(0.2)));
    assert_eq!(code(&covlab(&["probe", "c0", "--delta", "-1"])), 2);
    let b3 = write(dir.path(), "basis3.txt", "1 1\n---\n2 1\n---\n3 1\n");
    let o = covlab(&["probe", "sep", "--vecs", &b3, "--kind", "sup"]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["sep"].as_f64(), Some(1.0));
    let o = covlab(&["probe", "kottman", "--kind", "m", "--M", "8", "--dim", "3", "--size", "6"]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["sep"].as_f64().unwrap() <= 2.0);
}

#[test]
fn build_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_default(dir.path());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(covering_to_json(&covering_from_json(&text).unwrap()), text);
    let other = tempfile::tempdir().unwrap();
    let again = build_default(other.path());
    assert_eq!(std::fs::read_to_string(again).unwrap(), text);

    let csv = dir.path().join("csv");
    let o = covlab(&["verify", &out, "--samples", "5000", "--seed", "3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["graph"]["max_degree"].as_u64().is_some());
    assert_eq!(r["coverage"]["misses"].as_array().unwrap().len(), 0);
    assert!(r["unresolved"].as_array().unwrap().is_empty());
    assert!(csv.join("degree_histogram.csv").exists() && csv.join("misses.csv").exists());
}

#[test]
fn mutated_and_injected_coverings_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_default(dir.path());
    let cov = covering_from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let mut mutated = cov.clone();
    mutated.stages[1].bodies.remove(0);
    mutated.ledger.clear();
    let m = write(dir.path(), "mutated.json", &covering_to_json(&mutated));
    let o = covlab(&["verify", &m, "--samples", "20000"]);
    assert_eq!(code(&o), 4);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!r["coverage"]["misses"].as_array().unwrap().is_empty());

    let mut injected = cov.clone();
    let mut extra = injected.stages[1].bodies[0].clone();
    extra.label.as_mut().unwrap().stage = 2;
    let last = injected.stages.len() - 1;
    injected.stages[last].bodies.push(extra);
    let i = write(dir.path(), "injected.json", &covering_to_json(&injected));
    assert_eq!(code(&covlab(&["verify", &i, "--samples", "2000"])), 5);

    let bad = write(dir.path(), "broken.json", "{\"format_version\": \"1\",\n \"header\": 3}");
    assert_eq!(code(&covlab(&["verify", &bad])), 2);
}

#[test]
fn infeasible_builds_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BuildConfig { gamma_size: 2, n_stages: 3, ..BuildConfig::default() };
    let p = write(dir.path(), "c.json", &cfg.to_json());
    assert_eq!(code(&covlab(&["build", &p])), 3);
}
