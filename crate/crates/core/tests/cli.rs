use std::process::{Command, Output};

fn demon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demon"))
        .args(args)
        .env("DEMON_THREADS", "1")
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(demon(&["teleport"]).status.code(), Some(2));
}

#[test]
fn out_of_range_ratio_is_a_config_error() {
    let out = demon(&["sweep", "--ell-over-l", "1.5", "--cycles", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn csv_rejected_for_quantum() {
    assert_eq!(demon(&["quantum", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn statistical_failure_exits_one() {
    // a single archived cycle cannot amortize the count field
    let out = demon(&["delayed", "--n", "1", "--seeds", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_csv_to_stdout() {
    let out = demon(&["sweep", "--ell-over-l", "0.25", "--cycles", "20000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ell_over_L,empirical,stderr,analytic,gap,pass"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0.250000");
    assert_eq!(row[3], "-0.188722");
    assert_eq!(row[5], "true");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"ell_over_l": [0.125], "cycles": 1000, "seed": 5}"#).unwrap();
    let out_path = dir.path().join("out.csv");
    let out = demon(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--ell-over-l",
        "0.5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0.500000,"));
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"cycels": 10}"#).unwrap();
    let out = demon(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cycle_trace_is_json_lines() {
    let out = demon(&["cycle", "--cycles", "3", "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 12);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("op").is_some());
    }
}

#[test]
fn policy_file_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("halt.json");
    let doc = r#"{"name":"idle","control_states":["s"],"transitions":[
        {"state":"s","register":"Blank","action":"Halt","next":"s"},
        {"state":"s","register":"Left","action":"Halt","next":"s"},
        {"state":"s","register":"Right","action":"Halt","next":"s"}]}"#;
    std::fs::write(&path, doc).unwrap();
    let out = demon(&["cycle", "--policy", path.to_str().unwrap(), "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(demon(&["cycle", "--policy", "no-such-policy"]).status.code(), Some(2));
}
