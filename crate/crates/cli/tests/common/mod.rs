#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

const ARMIES: [&str; 5] = ["rebels", "militants", "soldiers", "insurgents", "guerrillas"];
const TOWNS: [&str; 4] = ["Kirkuk", "Falluja", "Basra", "Mosul"];
const DAYS: [&str; 4] = ["Monday", "Tuesday", "Friday", "Sunday"];

/// Sentence `i` of the synthetic smoke corpus. Every fourth sentence uses
/// "bombed" instead of "attacked".
pub fn smoke_sentence(i: usize) -> (String, &'static str, &'static str, &'static str) {
    let army = ARMIES[i % ARMIES.len()];
    let town = TOWNS[(i / 2) % TOWNS.len()];
    let verb = if i % 4 == 3 { "bombed" } else { "attacked" };
    let day = DAYS[(i / 3) % DAYS.len()];
    (format!("The {army} {verb} a checkpoint in {town} on {day} ."), army, verb, town)
}

pub fn smoke_record(id: &str, i: usize, split: Option<&str>) -> Value {
    let (text, army, verb, town) = smoke_sentence(i);
    let mut record = json!({
        "id": id,
        "text": text,
        "events": [{
            "type": "Conflict:Attack",
            "trigger": verb,
            "arguments": [
                {"role": "Attacker", "content": army},
                {"role": "Place", "content": town}
            ]
        }]
    });
    if let Some(s) = split {
        record["split"] = json!(s);
    }
    record
}

fn write_jsonl(path: &Path, records: &[Value]) {
    let text: String = records.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, text).unwrap();
}

/// Replay bundle where debaters always answer Attack/"attacked" with the
/// attacker "rebels", and the judge ratifies whatever task it is shown.
pub fn smoke_bundle() -> Value {
    let ed = r#"A: ["Conflict:Attack", "attacked"]"#;
    let table = "| event type | argument role | argument content |\n|---|---|---|\n| Conflict:Attack | Attacker | rebels |\n| Conflict:Attack | Target | None |\n| Conflict:Attack | Instrument | None |\n| Conflict:Attack | Place | None |";
    let debater = json!([
        {"match": "argument role", "reply": table, "repeat": true},
        {"match": "*", "reply": ed, "repeat": true}
    ]);
    json!({
        "embedder": {"kind": "hash", "dimension": 128},
        "scorer": {"scale": 0.001},
        "default": {
            "debater_a": debater,
            "debater_b": debater,
            "critic": [{"match": "*", "reply": "The answers look consistent.", "repeat": true}],
            "judge": [
                {"match": "| event type | event trigger |", "reply": "| event type | event trigger |\n|---|---|\n| Conflict:Attack | attacked |", "repeat": true},
                {"match": "*", "reply": table, "repeat": true}
            ]
        }
    })
}

pub struct SmokeWorkspace {
    pub config: PathBuf,
    pub reference: PathBuf,
    pub input: PathBuf,
}

/// Writes a replay-mode workspace: `n_train` train and `n_calib` calib
/// reference sentences, `n_input` input sentences, the bundle above, and a
/// config with the given AdaCP section.
pub fn write_smoke_workspace(dir: &Path, n_train: usize, n_calib: usize, n_input: usize, adacp: Value) -> SmokeWorkspace {
    let mut refs = Vec::new();
    for i in 0..n_train {
        refs.push(smoke_record(&format!("train-{i:02}"), 100 + i, Some("train")));
    }
    for i in 0..n_calib {
        refs.push(smoke_record(&format!("calib-{i:02}"), 200 + i, Some("calib")));
    }
    let inputs: Vec<Value> = (0..n_input).map(|i| smoke_record(&format!("s{i:02}"), i, None)).collect();
    let reference = dir.join("reference.jsonl");
    let input = dir.join("input.jsonl");
    write_jsonl(&reference, &refs);
    write_jsonl(&input, &inputs);
    std::fs::write(dir.join("bundle.json"), smoke_bundle().to_string()).unwrap();
    let config = json!({
        "backends": {"mode": "replay", "bundle": "bundle.json"},
        "paths": {"ontology": fixture("ontology/ace33.jsonl"), "reference": "reference.jsonl"},
        "adacp": adacp,
        "seed": 7
    });
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    SmokeWorkspace { config: config_path, reference, input }
}

/// AdaCP section with no initial-threshold overrides, so `calibrate` runs.
pub fn calibrating_adacp() -> Value {
    json!({"initial_threshold_override": {"ed": null, "eae": null}})
}
