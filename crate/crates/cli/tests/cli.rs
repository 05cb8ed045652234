use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn dcpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcpa")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn tmklo_reproduces_worked_example() {
    let out = dcpa(&[
        "tmklo",
        path(&fixture("worked_example.json")),
        "--source",
        "0",
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        report["levels"],
        serde_json::json!([
            {"time": 0, "nodes": [0]},
            {"time": 1, "nodes": [1]},
            {"time": 2, "nodes": [3]},
            {"time": 4, "nodes": [2, 4]},
        ])
    );
    assert_eq!(report["uncovered"], serde_json::json!([]));
}

#[test]
fn simulate_stranded_strands_p3_p4() {
    for behavior in ["silent", "mute-relay", "forge-content", "flood-forge"] {
        let out = dcpa(&[
            "simulate",
            path(&fixture("stranded.json")),
            "--scenario",
            path(&fixture("stranded.scenario.json")),
            "--placement",
            path(&fixture("stranded.placement.json")),
            "--behavior",
            behavior,
        ]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        assert!(text.contains("3\tNEVER"), "{text}");
        assert!(text.contains("4\tNEVER"), "{text}");
        assert!(text.contains("2\tbyzantine"), "{text}");
    }
}

#[test]
fn simulate_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = dcpa(&[
        "simulate",
        path(&fixture("worked_example.json")),
        "--scenario",
        path(&fixture("worked_example.scenario.json")),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["summary"]["broadcast_latency"], 4);
}

#[test]
fn verdict_exit_codes() {
    let impossible = dcpa(&[
        "verdict",
        path(&fixture("stranded.json")),
        "--scenario",
        path(&fixture("stranded.scenario.json")),
    ]);
    assert_eq!(impossible.status.code(), Some(2));
    let guaranteed = dcpa(&[
        "verdict",
        path(&fixture("worked_example.json")),
        "--scenario",
        path(&fixture("worked_example.scenario.json")),
    ]);
    assert_eq!(guaranteed.status.code(), Some(0));
    assert!(stdout(&guaranteed).contains("GUARANTEED_SUFFICIENT"));

    // two disjoint routes to node 2: the f+1 ordering covers, the 2f+1 one does not
    let dir = tempfile::tempdir().unwrap();
    let square = dir.path().join("square.json");
    std::fs::write(
        &square,
        r#"{"nodes":[0,1,2,3],"horizon":10,"edges":[
            {"u":0,"v":1,"intervals":[{"start":0,"end":10,"latency":1}]},
            {"u":1,"v":2,"intervals":[{"start":0,"end":10,"latency":1}]},
            {"u":0,"v":3,"intervals":[{"start":0,"end":10,"latency":1}]},
            {"u":3,"v":2,"intervals":[{"start":0,"end":10,"latency":1}]}]}"#,
    )
    .unwrap();
    let args = ["verdict", square.to_str().unwrap(), "--source", "0", "--f", "1"];
    let unknown = dcpa(&[&args[..], &["--strict-max-n", "2"]].concat());
    assert_eq!(unknown.status.code(), Some(3));
    let strict = dcpa(&args);
    assert_eq!(strict.status.code(), Some(2));
    assert!(stdout(&strict).contains("failing_placement"));
}

#[test]
fn sweep_reports_and_guards() {
    let (tvg, scenario) = (fixture("stranded.json"), fixture("stranded.scenario.json"));
    let args = ["sweep", path(&tvg), "--scenario", path(&scenario)];
    let out = dcpa(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("0 violations"));
    let refused = dcpa(&[&args[..], &["--max-n", "3"]].concat());
    assert_eq!(refused.status.code(), Some(5));
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, model) in ["random", "er", "tber", "tber"].iter().enumerate() {
        let out = dir.path().join(format!("{i}.json"));
        let status = dcpa(&[
            "gen",
            "--model",
            model,
            "--nodes",
            "6",
            "--horizon",
            "24",
            "--seed",
            "17",
            "--latency-max",
            "2",
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status.status.code(), Some(0));
        let validated = dcpa(&["validate", out.to_str().unwrap()]);
        assert_eq!(validated.status.code(), Some(0), "{model}");
        let text = std::fs::read_to_string(&out).unwrap();
        let g = dcpa::TimeVaryingGraph::from_json(&text).unwrap();
        assert_eq!(g.to_json(), text);
        files.push(text);
    }
    assert_eq!(files[2], files[3]);
}

#[test]
fn malformed_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"nodes":[0,1],"horizon":5,"edges":[{"u":0,"v":1,"intervals":[
            {"start":0,"end":3,"latency":1},{"start":2,"end":4,"latency":1}]}]}"#,
    )
    .unwrap();
    let out = dcpa(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("u: 0, v: 1"), "{err}");

    assert_eq!(dcpa(&["tmklo", "--k", "2"]).status.code(), Some(4));
    let late = dcpa(&[
        "simulate",
        path(&fixture("worked_example.json")),
        "--source",
        "0",
        "--t-br",
        "9",
    ]);
    assert_eq!(late.status.code(), Some(4));
}
