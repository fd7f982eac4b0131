use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn btlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btlab"))
        .args(args)
        .env_remove("BTLAB_SEED")
        .output()
        .expect("binary runs")
}

fn preset_path(name: &str) -> String {
    root()
        .join("presets")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).display().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn status_of(report: &Value, criterion: &str) -> String {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["criterion"] == criterion)
        .map(|v| v["status"].as_str().unwrap().to_owned())
        .unwrap()
}

fn check_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn run_figure_4() {
    let out = btlab(&["run", &preset_path("figure-4")]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(status_of(&report, "sc"), "FAIL");
    assert_eq!(status_of(&report, "ec"), "PASS");
}

#[test]
fn run_update_drop_reports_r3() {
    let out = btlab(&["run", &preset_path("update-drop")]);
    assert_eq!(out.status.code(), Some(0), "expectations are met");
    let report = json(&out);
    let ua = report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["criterion"] == "update-agreement")
        .unwrap();
    assert_eq!(ua["status"], "FAIL");
    assert!(ua["detail"].as_str().unwrap().starts_with("R3"));
}

#[test]
fn run_twice_writes_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = btlab(&[
            "run",
            "--preset",
            "bitcoin-like",
            "--seed",
            "99",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for file in [
        "bitcoin-like.trace.jsonl",
        "bitcoin-like.audit.jsonl",
        "bitcoin-like.report.json",
    ] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let report: Value =
        serde_json::from_slice(&fs::read(a.path().join("bitcoin-like.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 99);
}

#[test]
fn unmet_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(preset_path("figure-3")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["expect"]["sc"] = Value::from("FAIL");
    let path = dir.path().join("wrong.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = btlab(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": 7}").unwrap();
    let out = btlab(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let trace = dir.path().join("bad.jsonl");
    fs::write(&trace, "{\"event_id\": 1}\n").unwrap();
    assert_eq!(
        btlab(&["check", trace.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(btlab(&["run", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(
        btlab(&["run", "/does/not/exist.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn check_traces() {
    let out = btlab(&[
        "check",
        &fixture("figure-3.trace.jsonl"),
        "--criterion",
        "sc",
        "--window",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(check_lines(&out)[0]["status"], "PASS");

    let out = btlab(&["check", &fixture("empty.trace.jsonl"), "--criterion", "sc"]);
    assert_eq!(check_lines(&out)[0]["status"], "PASS");

    let out = btlab(&[
        "check",
        &fixture("figure-5.trace.jsonl"),
        "--criterion",
        "ec",
        "--complete",
    ]);
    assert_ne!(check_lines(&out)[0]["status"], "PASS");

    let out = btlab(&["check", &fixture("figure-6.trace.jsonl")]);
    let lines = check_lines(&out);
    assert_eq!(lines.len(), 9);
    assert!(lines
        .iter()
        .any(|v| v["criterion"] == "update-agreement" && v["status"] == "PASS"));

    let out = btlab(&[
        "check",
        &fixture("figure-4.trace.jsonl"),
        "-c",
        "sp",
        "--correct",
        "j",
        "--window",
        "1",
    ]);
    assert_eq!(check_lines(&out)[0]["status"], "PASS");
}

#[test]
fn replay_validates_and_compares() {
    let out = btlab(&[
        "replay",
        &fixture("figure-4.trace.jsonl"),
        "--scenario",
        &preset_path("figure-4"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["canonical"], true);
    assert_eq!(v["identical"], true);

    let dir = tempfile::tempdir().unwrap();
    let run = btlab(&[
        "run",
        &preset_path("update-drop"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let trace = dir.path().join("update-drop.trace.jsonl");
    let trace = trace.to_str().unwrap();
    assert_eq!(
        btlab(&["replay", trace, "--scenario", &preset_path("update-drop")])
            .status
            .code(),
        Some(0)
    );
    let other = btlab(&[
        "replay",
        trace,
        "--scenario",
        &preset_path("update-drop"),
        "--seed",
        "4",
    ]);
    assert_eq!(other.status.code(), Some(1));
    assert_eq!(json(&other)["identical"], false);
}

#[test]
fn campaigns() {
    let out = btlab(&["campaign", "--lab", "shm", "--runs", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["report"]["consensus"]["agreement"], 200);
    assert_eq!(v["report"]["consensus"]["validity"], 200);

    let out = btlab(&["campaign", "--lab", "hierarchy"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["histories"], 1000);
    assert_eq!(v["report"]["sc_pass_ec_fail"].as_array().unwrap().len(), 0);

    for lab in ["shm", "hierarchy", "kfork", "containment"] {
        let out = btlab(&["campaign", "--lab", lab, "--runs", "0"]);
        assert_eq!(out.status.code(), Some(0), "{lab}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_btlab"))
        .args(["campaign", "--lab", "containment", "--runs", "5"])
        .env("BTLAB_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 1234);
    let flag = btlab(&[
        "campaign",
        "--lab",
        "containment",
        "--runs",
        "5",
        "--seed",
        "1234",
    ]);
    assert_eq!(out.stdout, flag.stdout);
}

#[test]
fn shipped_presets_match_the_builtins() {
    let out = btlab(&["presets"]);
    let names: Vec<String> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(str::to_owned)
        .collect();
    assert_eq!(names.len(), 8);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        btlab(&["presets", "--write", dir.path().to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    for n in &names {
        let file = format!("{n}.json");
        let fresh = fs::read_to_string(dir.path().join(&file)).unwrap();
        assert_eq!(
            fresh,
            fs::read_to_string(root().join("presets").join(&file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn shipped_fixtures_match_the_figures() {
    for n in 3..=6 {
        let dir = tempfile::tempdir().unwrap();
        let name = format!("figure-{n}");
        btlab(&[
            "run",
            "--preset",
            &name,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        let file = format!("{name}.trace.jsonl");
        assert_eq!(
            fs::read_to_string(dir.path().join(&file)).unwrap(),
            fs::read_to_string(fixture(&file)).unwrap()
        );
    }
    assert!(fs::read_to_string(fixture("empty.trace.jsonl"))
        .unwrap()
        .is_empty());
}
