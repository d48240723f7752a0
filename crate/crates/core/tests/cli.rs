//! External-interface tests for the `aqkd` binary: verbs, flags, output
//! files, and the 0 / 1 / 2 exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    fs::write(
        &path,
        r#"{
            "name": "cli-test", "seed": 5, "trials": 2,
            "s": 16, "m": 48, "n_voters": 3,
            "candidates": ["A", "B"], "ecc_r": 3,
            "enforce_candidate_gate": false
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = aqkd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("cli-test"), "{stdout}");
    assert!(out_dir.join("report.json").is_file());
    assert!(out_dir.join("transcript.jsonl").is_file());

    // every transcript line is a standalone JSON record
    let transcript = fs::read_to_string(out_dir.join("transcript.jsonl")).unwrap();
    for line in transcript.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["step"].is_string() && v["channel"].is_string());
    }
    // bit strings serialize as lowercase hex with an explicit length
    let record = transcript
        .lines()
        .find(|l| l.contains("aqkd.request"))
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(record).unwrap();
    let hex = v["payload"]["p"]["hex"].as_str().unwrap();
    assert!(hex.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    assert_eq!(v["payload"]["p"]["len"].as_u64(), Some(48));
}

#[test]
fn identical_config_and_seed_give_identical_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut transcripts = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let output = aqkd(&[
            "run",
            "--quiet",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(output.status.success());
        assert!(output.stdout.is_empty(), "--quiet printed output");
        transcripts.push(fs::read(out_dir.join("transcript.jsonl")).unwrap());
    }
    assert_eq!(transcripts[0], transcripts[1]);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = aqkd(&[
        "run",
        "--quiet",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1",
        "--adversary",
        "replay-ballot",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["trials"], 1);
    assert_eq!(report["scenario"]["adversary"]["kind"], "replay-ballot");
    assert!(report["summary"]["ballots_injected"].as_u64().unwrap() > 0);

    // inline-JSON adversary spelling
    let output = aqkd(&[
        "run",
        "--quiet",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1",
        "--adversary",
        r#"{"kind": "intercept-resend", "fraction": 0.0}"#,
    ]);
    assert!(output.status.success(), "{output:?}");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // missing file
    let output = aqkd(&["run", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    // invalid field value
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"s": 16, "m": 48, "n_voters": 3, "candidates": [], "enforce_candidate_gate": false}"#,
    )
    .unwrap();
    let output = aqkd(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    // unknown adversary name
    let config = write_config(dir.path());
    let output = aqkd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--adversary",
        "quantum-bulldozer",
    ]);
    assert_eq!(output.status.code(), Some(1));
    // candidate gate at toy scale
    let gated = dir.path().join("gated.json");
    fs::write(
        &gated,
        r#"{"s": 16, "m": 48, "n_voters": 3, "candidates": ["A", "B"]}"#,
    )
    .unwrap();
    let output = aqkd(&["run", "--config", gated.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn verify_distinguishes_clean_and_doctored_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("out");
    assert!(aqkd(&[
        "run",
        "--quiet",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ])
    .status
    .success());
    let transcript_path = out_dir.join("transcript.jsonl");
    let output = aqkd(&["verify", transcript_path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    // name a sender on an anonymous record: property violation, exit 2
    let text = fs::read_to_string(&transcript_path).unwrap().replacen(
        r#""channel":"anonymous-classical","#,
        r#""channel":"anonymous-classical","sender":"user","#,
        1,
    );
    let doctored = dir.path().join("doctored.jsonl");
    fs::write(&doctored, text).unwrap();
    let output = aqkd(&["verify", doctored.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    assert!(String::from_utf8(output.stderr).unwrap().contains("violation"));

    // unreadable input is a config error, exit 1
    let output = aqkd(&["verify", dir.path().join("missing.jsonl").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn sweep_reports_every_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = aqkd(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "50",
        "--fractions",
        "0.0,1.0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let points: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    let points = points.as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["estimate"]["detections"], 0);
    assert!(points[1]["estimate"]["rate"].as_f64().unwrap() > 0.9);
}

#[test]
fn demo_runs_quietly_and_loudly() {
    let output = aqkd(&["demo", "--seed", "3"]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("demo election"), "{stdout}");
    assert!(stdout.contains("0 violation(s)"), "{stdout}");
    let output = aqkd(&["demo", "--seed", "3", "--quiet"]);
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
}
