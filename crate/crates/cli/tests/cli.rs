use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn capbound(args: &[&str]) -> Output {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("capbound").chain(args.iter().copied());
    let code = capbound_cli::run(argv, &mut stdout, &mut stderr);
    Output {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PARTITIONED: &str = r#"{
  "nodes": 2, "horizon": 60, "seed": 3,
  "partitions": [{"a": 0, "b": 1, "start": 10, "end": 25}],
  "strategy": {"kind": "LocalFirst", "G": 4},
  "workload": [
    {"t": 5, "node": 0, "kind": "write", "key": "A", "val": 1},
    {"t": 12, "node": 0, "kind": "write", "key": "A", "val": 2},
    {"t": 20, "node": 1, "kind": "read", "key": "A"},
    {"t": 40, "node": 1, "kind": "read", "key": "A"}
  ]
}"#;

#[test]
fn simulate_then_check() {
    let dir = TempDir::new().unwrap();
    let config = file(&dir, "config.json", PARTITIONED);
    let trace = dir.path().join("trace.jsonl");

    let out = capbound(&["simulate", s(&config), "-o", s(&trace)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.lines().all(|l| l.starts_with("{\"t\":")));

    let clean = capbound(&["check", s(&trace), "--tc", "100", "--ta", "100"]);
    assert_eq!(clean.code, 0);
    let report: serde_json::Value = serde_json::from_str(clean.stdout.trim()).unwrap();
    assert_eq!(report["violations"], serde_json::json!([]));
    assert_eq!(report["empirical_ta"], 0);
    assert_eq!(report["empirical_tc_min"], 9);

    let stale = capbound(&["check", s(&trace), "--tc", "3", "--ta", "0"]);
    assert_eq!(stale.code, 1);
    assert!(stale.stdout.contains("\"kind\":\"consistency\""));
}

#[test]
fn check_bound_flag() {
    let dir = TempDir::new().unwrap();
    let config = file(&dir, "config.json", PARTITIONED);
    let trace = dir.path().join("trace.jsonl");
    assert_eq!(capbound(&["simulate", s(&config), "-o", s(&trace)]).code, 0);

    let holds = capbound(&[
        "check",
        s(&trace),
        "--tc",
        "100",
        "--ta",
        "100",
        "--tp",
        "15",
        "--slack",
        "6",
    ]);
    assert_eq!(holds.code, 0);
    assert!(holds.stderr.contains("holds"));
    let fails = capbound(&[
        "check",
        s(&trace),
        "--tc",
        "100",
        "--ta",
        "100",
        "--tp",
        "30",
    ]);
    assert_eq!(fails.code, 1);
    assert!(fails.stderr.contains("violated"));
}

#[test]
fn simulate_to_stdout_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = file(&dir, "config.json", PARTITIONED);
    let a = capbound(&["simulate", s(&config)]);
    let b = capbound(&["simulate", s(&config)]);
    assert_eq!(a.code, 0);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn prove_exits_zero_on_violation() {
    let dir = TempDir::new().unwrap();
    let spec = file(
        &dir,
        "spec.json",
        r#"{"strategy":{"kind":"SyncAll","R":2},"tp":20,"t_start":10,"claimed_tc":5,"claimed_ta":5}"#,
    );
    let out = capbound(&["prove", s(&spec)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("\"kind\":\"availability\""));
}

#[test]
fn prove_rejects_claims_covering_tp() {
    let dir = TempDir::new().unwrap();
    let spec = file(
        &dir,
        "spec.json",
        r#"{"strategy":{"kind":"LocalFirst"},"tp":10,"t_start":10,"claimed_tc":5,"claimed_ta":5}"#,
    );
    let out = capbound(&["prove", s(&spec)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.starts_with("error:"));
}

#[test]
fn frontier_csv() {
    let dir = TempDir::new().unwrap();
    let config = file(
        &dir,
        "base.json",
        r#"{"nodes": 3, "horizon": 1, "strategy": {"kind": "SyncAll", "R": 2}}"#,
    );
    let csv = dir.path().join("frontier.csv");
    let out = capbound(&[
        "frontier",
        s(&config),
        "--tp",
        "20",
        "--deadlines",
        "0,4,8",
        "-o",
        s(&csv),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "D,tc,ta,tp,bound_ok");
    let labels: Vec<_> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels, vec!["local", "0", "4", "8", "inf"]);
    assert!(lines[1..].iter().all(|l| l.ends_with(",20,true")));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn tp_prints_longest_partition() {
    let dir = TempDir::new().unwrap();
    let config = file(&dir, "config.json", PARTITIONED);
    let out = capbound(&["tp", s(&config)]);
    assert_eq!((out.code, out.stdout.as_str()), (0, "15\n"));

    let relayed = file(
        &dir,
        "relay.json",
        r#"{"nodes": 3, "horizon": 50, "strategy": {"kind": "LocalFirst"},
            "partitions": [{"a": 0, "b": 1, "start": 10, "end": 25}]}"#,
    );
    assert_eq!(capbound(&["tp", s(&relayed)]).stdout, "0\n");
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let config = file(&dir, "config.json", PARTITIONED);

    let unknown = capbound(&["simulate", s(&config), "--bogus"]);
    assert_eq!(unknown.code, 2);
    assert!(unknown.stderr.contains("Usage"));
    assert_eq!(capbound(&[]).code, 2);
    assert_eq!(capbound(&["check", s(&config), "--tc", "1"]).code, 2);

    let bad = file(
        &dir,
        "bad.json",
        r#"{"nodes": 0, "horizon": 10, "strategy": {"kind": "SyncAll"}}"#,
    );
    assert_eq!(capbound(&["simulate", s(&bad)]).code, 2);
    let typo = file(
        &dir,
        "typo.json",
        r#"{"nodes": 2, "horizon": 10, "strategy": {"kind": "SyncAll"}, "nodez": 1}"#,
    );
    assert_eq!(capbound(&["tp", s(&typo)]).code, 2);
    assert_eq!(capbound(&["tp", "/nonexistent/config.json"]).code, 2);

    let garbage = file(&dir, "trace.jsonl", "{\"t\":0}\nnot json\n");
    let out = capbound(&["check", s(&garbage), "--tc", "1", "--ta", "1"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("line 1"));
}

#[test]
fn help_goes_to_stdout() {
    let out = capbound(&["--help"]);
    assert_eq!(out.code, 0);
    for sub in ["simulate", "check", "prove", "frontier", "tp"] {
        assert!(out.stdout.contains(sub));
    }
}
