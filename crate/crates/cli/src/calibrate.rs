//! `dao calibrate`: conformal initial thresholds from the calib split.

use std::path::Path;

use anyhow::{Context, Result};
use dao_core::adacp::{CalibrationSet, CalibrationTask};
use dao_core::corpus::{load_corpus, ReferenceEntry, Split};
use dao_core::debate::{calibration_input, retrieval_config, ArgumentAnswer, ArgumentRow, Resources, TaskSpec, TriggerAnswer};
use dao_core::ontology::EventTypeId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{save_config, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub task: &'static str,
    /// `None` when an override is set and calibration was skipped.
    pub n: Option<usize>,
    pub delta: f64,
    pub threshold: f64,
    pub skipped: bool,
}

fn task_name(task: CalibrationTask) -> &'static str {
    match task {
        CalibrationTask::Ed => "ed",
        CalibrationTask::Eae => "eae",
    }
}

/// (scoring prompt, gold answer) pairs for every annotated event.
pub fn calibration_pairs(ws: &Workspace, entries: &[ReferenceEntry], task: CalibrationTask) -> Result<Vec<(String, String)>> {
    let res = Resources {
        ontology: &ws.ontology,
        index: &ws.index,
        embedder: ws.embedder.as_ref(),
        scorer: ws.scorer.as_ref(),
    };
    let drag = retrieval_config(&ws.config.drag, ws.config.debate.use_drag);
    let mut pairs = Vec::new();
    for entry in entries {
        for event in entry.events() {
            let types: Vec<EventTypeId> = vec![event.event_type.clone()];
            match task {
                CalibrationTask::Ed => {
                    let input = calibration_input(res, &drag, TaskSpec::Ed, &entry.sentence, &types)?;
                    let answer = TriggerAnswer::new(event.event_type.clone(), event.trigger.clone());
                    pairs.push((input, answer.render()));
                }
                CalibrationTask::Eae => {
                    let Ok(def) = ws.ontology.lookup(&event.event_type) else {
                        continue;
                    };
                    let spec = TaskSpec::Eae { def, trigger: &event.trigger };
                    let input = calibration_input(res, &drag, spec, &entry.sentence, &types)?;
                    let rows: Vec<ArgumentRow> = event
                        .arguments
                        .iter()
                        .map(|a| ArgumentRow { role: a.role.clone(), content: Some(a.content.clone()) })
                        .collect();
                    let mut ignored = Vec::new();
                    let answer = ArgumentAnswer::canonical(&rows, def, &entry.sentence, &mut ignored);
                    pairs.push((input, answer.render()));
                }
            }
        }
    }
    Ok(pairs)
}

/// Calibrates every task without an override and writes the thresholds back
/// into the config file.
pub fn cmd_calibrate(config_path: &Path, corpus_path: &Path) -> Result<Vec<CalibrationReport>> {
    let mut ws = Workspace::open(config_path)?;
    let corpus = load_corpus(corpus_path)
        .with_context(|| format!("cannot load calibration corpus {}", corpus_path.display()))?;
    let calib: Vec<ReferenceEntry> = corpus.into_iter().filter(|e| e.split == Some(Split::Calib)).collect();
    let delta = ws.config.adacp.delta;
    let mut reports = Vec::new();
    for task in [CalibrationTask::Ed, CalibrationTask::Eae] {
        if let Some(value) = ws.config.adacp.initial_threshold_override.get(task) {
            reports.push(CalibrationReport { task: task_name(task), n: None, delta, threshold: value, skipped: true });
            continue;
        }
        let mut pairs = calibration_pairs(&ws, &calib, task)?;
        if let Some(k) = ws.config.adacp.calibration_sample {
            let mut rng = ChaCha8Rng::seed_from_u64(ws.config.seed);
            pairs.shuffle(&mut rng);
            pairs.truncate(k);
        }
        let n = pairs.len();
        let mut set = CalibrationSet::new(pairs);
        let threshold = set
            .calibrate(ws.scorer.as_ref(), delta)
            .with_context(|| format!("calibrating {}", task_name(task)))?;
        ws.config.adacp.calibrated.set(task, Some(threshold.value));
        reports.push(CalibrationReport { task: task_name(task), n: Some(n), delta, threshold: threshold.value, skipped: false });
    }
    save_config(config_path, &ws.config)?;
    Ok(reports)
}
