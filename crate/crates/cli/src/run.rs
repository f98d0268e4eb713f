//! `dao run`: debate every sentence of a corpus and write a run directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use dao_core::adacp::RiskHistogram;
use dao_core::corpus::{load_corpus, CorpusRecord, ReferenceEntry};
use dao_core::debate::{
    DebateEngine, Resources, RiskObservation, SessionError, SessionMode, SessionOutput, Stage,
    TaskKind, Transcript,
};
use serde::Serialize;

use crate::config::Workspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunTask {
    /// Detection followed by argument extraction.
    Ee,
    /// Detection only.
    Ed,
    /// Argument extraction for the gold triggers of the input.
    Eae,
}

pub const CONFIG_FILE: &str = "config.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const HISTOGRAMS_FILE: &str = "histograms.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Histograms {
    pub ed: Vec<RiskHistogram>,
    pub eae: Vec<RiskHistogram>,
}

/// 20-bin histograms of debater risks, one per round and task.
pub fn risk_histograms(observations: &[RiskObservation], max_rounds: u32) -> Histograms {
    let per_task = |task: TaskKind| {
        let mut by_round: BTreeMap<u32, Vec<f64>> = (0..max_rounds).map(|r| (r, Vec::new())).collect();
        for o in observations {
            if o.task == task && matches!(o.stage, Stage::InitialOpinion | Stage::CrossExamination) {
                by_round.entry(o.round).or_default().push(o.risk);
            }
        }
        by_round
            .into_iter()
            .map(|(round, risks)| RiskHistogram::from_risks(round, &risks))
            .collect()
    };
    Histograms {
        ed: per_task(TaskKind::Ed),
        eae: per_task(TaskKind::Eae),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub sentences: usize,
    pub failed: usize,
    pub warnings: usize,
    pub events: usize,
}

fn session_mode(task: RunTask, entry: &ReferenceEntry) -> SessionMode {
    match task {
        RunTask::Ee => SessionMode::Full,
        RunTask::Ed => SessionMode::DetectionOnly,
        RunTask::Eae => SessionMode::ArgumentsOnly(
            entry
                .events()
                .iter()
                .map(|e| (e.event_type.clone(), e.trigger.clone()))
                .collect(),
        ),
    }
}

/// One debate session for `entry`, with fresh agents.
pub fn run_sentence(ws: &Workspace, entry: &ReferenceEntry, task: RunTask) -> Result<SessionOutput, SessionError> {
    let agents = ws.agents_for(entry.id());
    let res = Resources {
        ontology: &ws.ontology,
        index: &ws.index,
        embedder: ws.embedder.as_ref(),
        scorer: ws.scorer.as_ref(),
    };
    let thresholds = ws.config.thresholds().map_err(|e| SessionError {
        sentence_id: entry.id().to_string(),
        error: dao_core::debate::DebateError::Config(e.to_string()),
        transcript: Transcript::new(),
    })?;
    let engine = DebateEngine::new(
        &agents,
        res,
        ws.config.debate.clone(),
        ws.config.drag.clone(),
        ws.config.adacp.beta,
        thresholds,
    )
    .map_err(|error| SessionError {
        sentence_id: entry.id().to_string(),
        error,
        transcript: Transcript::new(),
    })?;
    engine.run_session(&entry.sentence, session_mode(task, entry))
}

/// Runs every sentence of `input` and writes the run directory. Outputs are
/// in input order. Failed sessions keep their transcripts; any failure makes
/// the command fail after all outputs are written.
pub fn cmd_run(config_path: &Path, input: &Path, out: &Path, task: RunTask) -> Result<RunSummary> {
    let ws = Workspace::open(config_path)?;
    ws.config.thresholds()?;
    let inputs = load_corpus(input).with_context(|| format!("cannot load input corpus {}", input.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ws.config.workers)
        .build()
        .context("cannot start worker pool")?;
    let results: Vec<Result<SessionOutput, SessionError>> = pool.install(|| {
        use rayon::prelude::*;
        inputs.par_iter().map(|entry| run_sentence(&ws, entry, task)).collect()
    });

    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    std::fs::write(out.join(CONFIG_FILE), ws.config.to_json())?;

    let mut predictions = BufWriter::new(File::create(out.join(PREDICTIONS_FILE))?);
    let mut transcripts = BufWriter::new(File::create(out.join(TRANSCRIPTS_FILE))?);
    let mut observations = Vec::new();
    let mut summary = RunSummary { sentences: inputs.len(), failed: 0, warnings: 0, events: 0 };
    let mut first_error = None;
    for (entry, result) in inputs.iter().zip(results) {
        match result {
            Ok(output) => {
                summary.warnings += output.transcript.warnings().count();
                summary.events += output.record.events.len();
                let record = CorpusRecord {
                    id: output.record.sentence_id.clone(),
                    text: output.record.text.clone(),
                    split: None,
                    events: output.record.events.clone(),
                };
                serde_json::to_writer(&mut predictions, &record)?;
                predictions.write_all(b"\n")?;
                output.transcript.write_jsonl(entry.id(), &mut transcripts)?;
                observations.extend(output.risks);
            }
            Err(err) => {
                summary.failed += 1;
                err.transcript.write_jsonl(entry.id(), &mut transcripts)?;
                eprintln!("error: {err}");
                first_error.get_or_insert(err.to_string());
            }
        }
    }
    predictions.flush()?;
    transcripts.flush()?;
    let histograms = risk_histograms(&observations, ws.config.debate.max_rounds);
    let mut hist_json = serde_json::to_string_pretty(&histograms)?;
    hist_json.push('\n');
    std::fs::write(out.join(HISTOGRAMS_FILE), hist_json)?;

    match first_error {
        Some(e) => Err(anyhow!("{} of {} sessions failed; first: {e}", summary.failed, summary.sentences)),
        None => Ok(summary),
    }
}
