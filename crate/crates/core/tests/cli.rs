use std::path::PathBuf;
use std::process::{Command, Output};

fn sdvn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdvn")).args(args).output().unwrap()
}

fn scenario(name: &str, ext: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.{ext}"))
        .display()
        .to_string()
}

#[test]
fn compare_writes_report_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let o = sdvn(&[
        "compare",
        "--topology",
        &scenario("merge", "topo"),
        "--trace",
        &scenario("merge", "trace"),
        "--out",
        out.path().to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["rules.csv", "delays.csv", "events.csv", "summary.txt"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("seed: 7"));
}

#[test]
fn run_single_strategy() {
    let out = tempfile::tempdir().unwrap();
    let o = sdvn(&[
        "run",
        "--topology",
        &scenario("one_to_one", "topo"),
        "--trace",
        &scenario("one_to_one", "trace"),
        "--strategy",
        "baseline",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("baseline"));
}

#[test]
fn missing_file_is_a_usage_error_naming_the_path() {
    let out = tempfile::tempdir().unwrap();
    let o = sdvn(&[
        "compare",
        "--topology",
        "/nonexistent/x.topo",
        "--trace",
        &scenario("merge", "trace"),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/x.topo"));
}

#[test]
fn unknown_strategy_is_rejected() {
    let o = sdvn(&[
        "run",
        "--topology",
        &scenario("merge", "topo"),
        "--trace",
        &scenario("merge", "trace"),
        "--strategy",
        "bogus",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_tuning_is_rejected() {
    let o = sdvn(&[
        "compare",
        "--topology",
        &scenario("merge", "topo"),
        "--trace",
        &scenario("merge", "trace"),
        "--k",
        "0.5",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pathfind_prints_heading_consistent_route() {
    let o = sdvn(&[
        "pathfind",
        "--topology",
        &scenario("detour", "topo"),
        "--src",
        "A",
        "--dst",
        "F",
        "--vx",
        "0",
        "--vy",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "A B D F");

    let o = sdvn(&[
        "pathfind",
        "--topology",
        &scenario("detour", "topo"),
        "--src",
        "A",
        "--dst",
        "Q",
        "--vx",
        "1",
        "--vy",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_and_generate() {
    let o = sdvn(&[
        "validate",
        "--topology",
        &scenario("grid", "topo"),
        "--trace",
        &scenario("grid", "trace"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok:"));

    let dir = tempfile::tempdir().unwrap();
    let o = sdvn(&["generate", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let topo = dir.path().join("topology.txt");
    let trace = dir.path().join("trace.txt");
    let o = sdvn(&[
        "validate",
        "--topology",
        topo.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn no_arguments_is_usage_error() {
    assert_eq!(sdvn(&[]).status.code(), Some(2));
}
