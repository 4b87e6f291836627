use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use hwsim_core::eval::ScoreCard;
use hwsim_core::scenario::read_dataset;

fn hwsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwsim"))
        .args(args)
        .env_remove("HWSIM_STEP_FACTOR")
        .output()
        .expect("spawn hwsim")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn compile_coffee_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("coffee");
    let o = hwsim(&["compile", "coffee", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ds = read_dataset(&out).unwrap();
    assert_eq!(ds.manifest.tasks.len(), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay_success     1.00"));
}

#[test]
fn run_then_score_heuristic_reaches_tsr_one() {
    let dir = tempfile::tempdir().unwrap();
    let ep = dir.path().join("coffee");
    let logs = dir.path().join("logs.jsonl");
    let report = dir.path().join("score.json");
    let tsv = dir.path().join("score.tsv");
    assert!(hwsim(&["compile", "coffee", "--out", ep.to_str().unwrap()])
        .status
        .success());
    let o = hwsim(&[
        "run",
        ep.to_str().unwrap(),
        "--planner",
        "heuristic",
        "--interface",
        "diff",
        "--memory",
        "full",
        "--seed",
        "7",
        "--out",
        logs.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&logs).unwrap().lines().count(), 3);
    let o = hwsim(&[
        "score",
        ep.to_str().unwrap(),
        logs.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--tsv",
        tsv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let card: ScoreCard = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(card.tsr, 1.0);
    assert_eq!(card.episode_tsr, 1.0);
    let table = fs::read_to_string(&tsv).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 + 1);
}

#[test]
fn run_is_reproducible_at_fixed_seed() {
    let run = |seed: &str| {
        let o = hwsim(&["run", "salad", "--memory", "bounded", "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        o.stdout
    };
    assert_eq!(run("3"), run("3"));
}

#[test]
fn validate_broken_scenario_fails_and_names_the_check() {
    let o = hwsim(&["validate", &fixture("broken_gt.toml")]);
    assert!(!o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("gt_coverage") && out.contains("FAIL"), "{out}");
    let err = stderr(&o);
    assert!(err.contains("error[") && err.contains("grab"), "{err}");
    assert!(err.contains("failed checks: gt_coverage"), "{err}");
}

#[test]
fn truncated_scenario_reports_a_located_parse_error() {
    let o = hwsim(&["validate", &fixture("truncated.toml")]);
    assert!(!o.status.success());
    let err = stderr(&o);
    let first = err.lines().next().unwrap();
    // `<path>: error[code] line:col: message`
    assert!(
        first.contains(": error[") && first.split(' ').nth(2).unwrap().contains(':'),
        "{err}"
    );
}

#[test]
fn compile_refuses_a_broken_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = hwsim(&["compile", &fixture("broken_gt.toml"), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn bad_env_override_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_hwsim"))
        .args(["run", "coffee"])
        .env("HWSIM_RHO_FAIL", "1.5")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("HWSIM_RHO_FAIL"));
}

#[test]
fn bootstrap_reads_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pairs.csv");
    let mut text = String::from("unit,a,b\n");
    for i in 0..20 {
        text.push_str(&format!("u{i},{},{}\n", i as f64 * 0.01, i as f64 * 0.01 + 0.2));
    }
    fs::write(&p, text).unwrap();
    let o = hwsim(&["bootstrap", p.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["delta"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(v["ci_low"].as_f64().unwrap() > 0.0);
    assert_eq!(v["n"], 20);
}

#[cfg(unix)]
#[test]
fn serve_and_client_over_a_unix_socket() {
    let dir = tempfile::tempdir().unwrap();
    let sock = dir.path().join("s.sock");
    let out = dir.path().join("sessions");
    let endpoint = format!("unix:{}", sock.display());
    let mut server = Command::new(env!("CARGO_BIN_EXE_hwsim"))
        .args(["serve", "coffee", "--listen", &endpoint, "--sessions", "1"])
        .args(["--out", out.to_str().unwrap()])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // Wait for the bind announcement.
    let mut err = BufReader::new(server.stderr.take().unwrap());
    let mut line = String::new();
    err.read_line(&mut line).unwrap();
    assert!(line.starts_with("serving coffee"), "{line}");
    let o = hwsim(&["client", "coffee", "--connect", &endpoint, "--planner", "ground-truth"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(server.wait().unwrap().success());
    let card: ScoreCard =
        serde_json::from_str(&fs::read_to_string(out.join("session_000/scorecard.json")).unwrap()).unwrap();
    assert_eq!((card.f1, card.tsr, card.tcr, card.wsr), (1.0, 1.0, 1.0, 1.0));
    let transcript = fs::read_to_string(out.join("session_000/transcript.jsonl")).unwrap();
    assert!(transcript.lines().next().unwrap().contains("TASK_CONTEXT"));
    assert!(transcript.lines().last().unwrap().contains("RUN_END"));
}
