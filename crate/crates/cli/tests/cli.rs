use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE: &str = r#"{"format":"aaa-trace","version":1,"sequence_id":"fixture3","n_experts":2,"feature_dim":2,"template":[1.0,0.0],"initial_box":[10.0,10.0,20.0,20.0]}
{"frame":1,"boxes":[[10.0,10.0,20.0,20.0],[10.0,10.0,20.0,20.0]],"features":[[1.0,0.0],[1.0,0.0]],"gt":[10.0,10.0,20.0,20.0]}
{"frame":2,"boxes":[[11.0,10.0,20.0,20.0],[40.0,30.0,20.0,20.0]],"features":[[0.2,1.0],[0.0,1.0]],"gt":[11.0,10.0,20.0,20.0]}
{"frame":3,"boxes":[[12.0,11.0,20.0,20.0],[45.0,32.0,20.0,20.0]],"features":[[1.0,0.1],[-1.0,0.3]],"gt":[12.0,11.0,20.0,20.0]}
"#;

fn aaa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aaa"))
        .args(args)
        .env_remove("AAA_OUT_DIR")
        .output()
        .expect("spawn aaa")
}

fn ok(args: &[&str]) -> Output {
    let out = aaa(args);
    assert!(
        out.status.success(),
        "aaa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: u64, frames: usize) -> std::path::PathBuf {
    let path = dir.join(format!("seq{seed}.jsonl"));
    let scn = format!(
        r#"{{"frames":{frames},"experts":3,"switch_period":60,"noise_scale":2.0,"anchor_signal_rate":0.2,"seed":{seed}}}"#
    );
    ok(&["simulate", "--scenario", &scn, "--out", s(&path)]);
    path
}

#[test]
fn run_on_three_frame_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("f.jsonl");
    fs::write(&trace, FIXTURE).unwrap();
    let report = dir.path().join("r.json");
    ok(&["run", "--trace", s(&trace), "--theta", "0.7", "--seed", "3", "--out", s(&report)]);
    let v: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "run");
    assert_eq!(v["decisions"].as_array().unwrap().len(), 3);
    assert_eq!(v["frames"], 3);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = aaa(&["run", "--trace", "x.jsonl", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_trace_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.jsonl");
    fs::write(&trace, FIXTURE.replace("[40.0,30.0,20.0,20.0]", "[40.0,30.0,0.0,20.0]")).unwrap();
    let report = dir.path().join("r.json");
    let out = aaa(&["run", "--trace", s(&trace), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert!(!report.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn bad_theta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("f.jsonl");
    fs::write(&trace, FIXTURE).unwrap();
    let report = dir.path().join("r.json");
    let out = aaa(&["run", "--trace", s(&trace), "--theta", "1.5", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!report.exists());
}

#[test]
fn analyze_two_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir(&runs).unwrap();
    for seed in [1, 2] {
        let trace = simulate(dir.path(), seed, 400);
        let out = runs.join(format!("seq{seed}.run.json"));
        ok(&["run", "--trace", s(&trace), "--seed", "5", "--out", s(&out)]);
    }
    let report = dir.path().join("analysis.json");
    ok(&["analyze", "--decisions", s(&runs), "--report", s(&report)]);
    let v: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["kind"], "analysis");
    assert_eq!(v["sequences"].as_array().unwrap().len(), 2);
    assert_eq!(v["proposition_pseudo_gt"]["sequences"], 2);
    assert_eq!(v["proposition_gt"]["sequences"], 2);
    // Re-running the analysis over the same directory ignores the analysis
    // report itself.
    let again = dir.path().join("again.json");
    fs::copy(&report, runs.join("analysis.json")).unwrap();
    ok(&["analyze", "--decisions", s(&runs), "--report", s(&again)]);
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let trace = simulate(dir.path(), 7, 500);
    let mut bytes = Vec::new();
    for k in 0..2 {
        let run = dir.path().join(format!("run{k}.json"));
        let analysis = dir.path().join(format!("analysis{k}.json"));
        ok(&["run", "--trace", s(&trace), "--seed", "9", "--mode", "sampled", "--out", s(&run)]);
        ok(&["analyze", "--decisions", s(&run), "--report", s(&analysis)]);
        bytes.push((fs::read(&run).unwrap(), fs::read(&analysis).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn default_output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_aaa"))
        .args([
            "simulate",
            "--scenario",
            r#"{"frames":20,"experts":2,"switch_period":5,"noise_scale":1.0,"anchor_signal_rate":0.5,"seed":3,"sequence_id":"envseq"}"#,
        ])
        .env("AAA_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("envseq.jsonl").is_file());
}

#[test]
fn sweep_over_trace_directory() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    fs::create_dir(&traces).unwrap();
    simulate(&traces, 1, 300);
    simulate(&traces, 2, 300);
    let report = dir.path().join("sweep.json");
    let out = ok(&["sweep", "--traces", s(&traces), "--grid", "0.6:0.8:0.1", "--out", s(&report)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("best theta"));
    let v: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r["best"] == true).count(), 1);
    let ratios: Vec<f64> = rows.iter().map(|r| r["anchor_ratio"].as_f64().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn malformed_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let out = aaa(&[
        "simulate",
        "--scenario",
        r#"{"frames":10,"experts":1,"switch_period":5,"noise_scale":1.0,"anchor_signal_rate":0.5,"seed":0}"#,
        "--out",
        s(&path),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!path.exists());
}
