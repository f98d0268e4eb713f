mod common;

use std::path::Path;
use std::process::Command;

use dao_cli::calibrate::cmd_calibrate;
use dao_cli::config::load_config;
use dao_cli::eval::{cmd_eval, EvalTask, Metric};
use dao_cli::run::{cmd_run, RunTask, CONFIG_FILE, HISTOGRAMS_FILE, PREDICTIONS_FILE, TRANSCRIPTS_FILE};
use serde_json::{json, Value};

use common::*;

const CALIB_ROWS: [(&str, &str, &str); 9] = [
    ("c1", "Life:Die", "He died in hospital ."),
    ("c2", "Conflict:Attack", "Troops fought near the border ."),
    ("c3", "Justice:Arrest-Jail", "Police arrested the suspect ."),
    ("c4", "Life:Die", "Two people were killed ."),
    ("c5", "Conflict:Attack", "The war lasted years ."),
    ("c6", "Movement:Transport", "She traveled to Paris ."),
    ("c7", "Life:Marry", "They married in June ."),
    ("c8", "Conflict:Attack", "Gunmen ambushed the convoy ."),
    ("c9", "Justice:Arrest-Jail", "He was detained overnight ."),
];

const CALIB_TRIGGERS: [&str; 9] = ["died", "fought", "arrested", "killed", "war", "traveled", "married", "ambushed", "detained"];

fn write_calib(path: &Path) {
    let text: String = CALIB_ROWS
        .iter()
        .zip(CALIB_TRIGGERS)
        .map(|((id, ty, text), w)| {
            format!("{}\n", json!({"id": id, "text": text, "split": "calib", "events": [{"type": ty, "trigger": w, "arguments": []}]}))
        })
        .collect();
    std::fs::write(path, text).unwrap();
}

/// Brute-force conformal quantile: the smallest risk r whose count of risks
/// <= r covers at least (n+1)(1-δ) with δ = 20%, i.e. 5k >= 4(n+1).
fn oracle_quantile(mut risks: Vec<f64>) -> f64 {
    risks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = risks.len();
    risks
        .iter()
        .copied()
        .find(|r| 5 * risks.iter().filter(|x| *x <= r).count() >= 4 * (n + 1))
        .unwrap_or(f64::INFINITY)
}

#[test]
fn calibrate_matches_oracle_quantile() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(
        dir.path(),
        4,
        0,
        1,
        json!({"delta": 0.2, "initial_threshold_override": {"ed": null, "eae": 3.0}}),
    );
    let calib = dir.path().join("calib.jsonl");
    write_calib(&calib);

    // Keyless scorer with scale 0.001: risk = 0.001 * (1 + 2 * chars(answer)).
    let risks: Vec<f64> = CALIB_ROWS
        .iter()
        .zip(CALIB_TRIGGERS)
        .map(|((_, ty, _), w)| 0.001 * (1 + 2 * format!("[\"{ty}\", \"{w}\"]").chars().count()) as f64)
        .collect();
    let expected = oracle_quantile(risks);

    let reports = cmd_calibrate(&ws.config, &calib).unwrap();
    assert_eq!(reports[0].n, Some(9));
    assert_eq!(reports[0].threshold, expected);
    assert!(reports[1].skipped);
    let saved = load_config(&ws.config).unwrap();
    assert_eq!(saved.adacp.calibrated.ed, Some(expected));
    assert_eq!(saved.adacp.calibrated.eae, None);
}

#[test]
fn calibrate_skips_overridden_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(dir.path(), 4, 3, 1, json!({}));
    let reports = cmd_calibrate(&ws.config, &ws.reference).unwrap();
    assert!(reports.iter().all(|r| r.skipped));
    assert_eq!(reports[0].threshold, 1.0);
    assert_eq!(reports[1].threshold, 3.0);
    let saved = load_config(&ws.config).unwrap();
    assert_eq!(saved.adacp.calibrated.ed, None);
}

#[test]
fn calibrate_without_calib_rows_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(dir.path(), 4, 0, 1, calibrating_adacp());
    let err = cmd_calibrate(&ws.config, &ws.reference).unwrap_err();
    assert!(format!("{err:#}").contains("empty"), "{err:#}");
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn run_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(dir.path(), 8, 0, 5, json!({}));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_run(&ws.config, &ws.input, &a, RunTask::Ee).unwrap();
    let mut config: Value = serde_json::from_str(&std::fs::read_to_string(&ws.config).unwrap()).unwrap();
    config["workers"] = json!(3);
    std::fs::write(&ws.config, config.to_string()).unwrap();
    cmd_run(&ws.config, &ws.input, &b, RunTask::Ee).unwrap();
    for file in [PREDICTIONS_FILE, TRANSCRIPTS_FILE, HISTOGRAMS_FILE] {
        assert_eq!(read(&a, file), read(&b, file), "{file}");
    }
    let ids: Vec<String> = read(&a, PREDICTIONS_FILE)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["s00", "s01", "s02", "s03", "s04"]);
    let snapshot = load_config(&a.join(CONFIG_FILE)).unwrap();
    assert_eq!(snapshot.seed, 7);
    let hist: Value = serde_json::from_str(&read(&a, HISTOGRAMS_FILE)).unwrap();
    assert_eq!(hist["ed"].as_array().unwrap().len(), 3);
    assert_eq!(hist["ed"][0]["counts"].as_array().unwrap().len(), 20);
}

#[test]
fn run_replays_table3_cases() {
    let dir = tempfile::tempdir().unwrap();
    let table3 = fixture("table3");
    cmd_run(&table3.join("config.json"), &table3.join("input.jsonl"), dir.path(), RunTask::Ee).unwrap();
    let preds: Vec<Value> = read(dir.path(), PREDICTIONS_FILE)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(preds[0]["events"][0]["type"], "Personnel:End-Position");
    assert_eq!(preds[0]["events"][0]["trigger"], "formerly");
    assert_eq!(preds[1]["events"], json!([]));
    assert!(preds[0].get("split").is_none());
}

#[test]
fn detection_only_run_skips_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(dir.path(), 4, 0, 2, json!({}));
    let out = dir.path().join("out");
    cmd_run(&ws.config, &ws.input, &out, RunTask::Ed).unwrap();
    assert!(!read(&out, TRANSCRIPTS_FILE).contains("\"task\":\"eae\""));
    let first: Value = serde_json::from_str(read(&out, PREDICTIONS_FILE).lines().next().unwrap()).unwrap();
    assert_eq!(first["events"][0]["arguments"], json!([]));
}

#[test]
fn eval_hand_counted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let outcome = cmd_eval(
        &fixture("eval/pred.jsonl"),
        &fixture("eval/gold.jsonl"),
        EvalTask::Ed,
        Metric::Exact,
        Some(&report),
    )
    .unwrap();
    let ed = &outcome.reports[0].prf;
    assert_eq!((ed.tp, ed.fp, ed.fn_), (1, 0, 1));
    assert_eq!(ed.precision, 1.0);
    assert_eq!(ed.recall, 0.5);
    assert!((ed.f1 - 0.6667).abs() < 1e-4);
    assert!(outcome.warnings.is_empty());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(written[0]["task"], "ed");
    assert_eq!(written[0]["fn"], 1);
}

#[test]
fn eval_identity_scores_one() {
    let gold = fixture("eval/gold.jsonl");
    for metric in [Metric::Exact, Metric::Head, Metric::Types] {
        let outcome = cmd_eval(&gold, &gold, EvalTask::Ee, metric, None).unwrap();
        assert_eq!(outcome.reports.len(), 2);
        assert!(outcome.reports.iter().all(|r| r.prf.f1 == 1.0));
    }
}

#[test]
fn eval_mismatched_ids_warn_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.jsonl");
    let extra = r#"{"id": "zz", "text": "Rebels attacked the town .", "events": [{"type": "Conflict:Attack", "trigger": "attacked", "arguments": []}]}"#;
    std::fs::write(&pred, format!("{extra}\n")).unwrap();
    let outcome = cmd_eval(&pred, &fixture("eval/gold.jsonl"), EvalTask::Ed, Metric::Exact, None).unwrap();
    assert_eq!(outcome.warnings.len(), 2);
    let prf = &outcome.reports[0].prf;
    assert_eq!((prf.tp, prf.fp, prf.fn_), (0, 1, 2));
}

fn dao(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dao")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(dao(&["--help"]).status.code(), Some(0));
    assert_eq!(dao(&["--version"]).status.code(), Some(0));
    assert_eq!(dao(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dao(&["eval", "--pred", "x"]).status.code(), Some(1));
    let missing = dao(&["eval", "--pred", "/nonexistent/p.jsonl", "--gold", "/nonexistent/g.jsonl", "--task", "ed"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}

#[test]
fn eval_binary_prints_report_and_table() {
    let pred = fixture("eval/pred.jsonl");
    let gold = fixture("eval/gold.jsonl");
    let out = dao(&["eval", "--pred", pred.to_str().unwrap(), "--gold", gold.to_str().unwrap(), "--task", "ee", "--metric", "types"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json: Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert!(stdout.contains("stand-in"));
}

#[test]
fn failed_session_keeps_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_smoke_workspace(dir.path(), 4, 0, 3, json!({}));
    let mut bundle: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bundle.json")).unwrap()).unwrap();
    bundle["sessions"] = json!({"s01": {"judge": []}});
    std::fs::write(dir.path().join("bundle.json"), bundle.to_string()).unwrap();
    let out = dir.path().join("out");
    let status = dao(&[
        "run", "-c", ws.config.to_str().unwrap(), "--input", ws.input.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(2));
    let ids: Vec<String> = read(&out, PREDICTIONS_FILE)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["s00", "s02"]);
    assert!(read(&out, TRANSCRIPTS_FILE).contains("\"sentence_id\":\"s01\""));
    assert!(out.join(HISTOGRAMS_FILE).exists());
}
