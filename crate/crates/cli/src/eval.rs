//! `dao eval`: score a prediction file against gold annotations.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use dao_core::corpus::{CorpusRecord, Sentence};
use dao_core::evalkit::{
    argument_exact_f1, argument_head_f1, argument_items, argument_spans, sentence_map,
    trigger_f1, trigger_items, trigger_spans, type_overlap_f1, HeuristicHeads, Prf,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Ed,
    Eae,
    Ee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Exact,
    Head,
    /// Span-overlap stand-in for the CASIE "types" metric.
    Types,
}

impl Metric {
    fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Head => "head",
            Self::Types => "types",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub task: &'static str,
    pub metric: &'static str,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub reports: Vec<ScoreReport>,
    pub warnings: Vec<String>,
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))
        })
        .collect()
}

fn id_warnings(preds: &[CorpusRecord], golds: &[CorpusRecord]) -> Vec<String> {
    let p: BTreeSet<&str> = preds.iter().map(|r| r.id.as_str()).collect();
    let g: BTreeSet<&str> = golds.iter().map(|r| r.id.as_str()).collect();
    let mut w = Vec::new();
    let extra: Vec<&str> = p.difference(&g).copied().collect();
    if !extra.is_empty() {
        w.push(format!("{} predicted sentence(s) not in gold, scored as false positives: {}", extra.len(), extra.join(", ")));
    }
    let missing: Vec<&str> = g.difference(&p).copied().collect();
    if !missing.is_empty() {
        w.push(format!("{} gold sentence(s) without predictions, scored as misses: {}", missing.len(), missing.join(", ")));
    }
    w
}

fn trigger_score(preds: &[CorpusRecord], golds: &[CorpusRecord], metric: Metric, sentences: &HashMap<String, Sentence>) -> Prf {
    match metric {
        Metric::Exact | Metric::Head => trigger_f1(&trigger_items(preds), &trigger_items(golds)),
        Metric::Types => type_overlap_f1(&trigger_spans(preds), &trigger_spans(golds), sentences),
    }
}

fn argument_score(
    preds: &[CorpusRecord],
    golds: &[CorpusRecord],
    metric: Metric,
    sentences: &HashMap<String, Sentence>,
) -> Result<Prf> {
    Ok(match metric {
        Metric::Exact => argument_exact_f1(&argument_items(preds), &argument_items(golds)),
        Metric::Head => argument_head_f1(&argument_items(preds), &argument_items(golds), sentences, &HeuristicHeads)?,
        Metric::Types => type_overlap_f1(&argument_spans(preds), &argument_spans(golds), sentences),
    })
}

pub fn evaluate(preds: &[CorpusRecord], golds: &[CorpusRecord], task: EvalTask, metric: Metric) -> Result<EvalOutcome> {
    let warnings = id_warnings(preds, golds);
    let mut sentences = sentence_map(preds);
    sentences.extend(sentence_map(golds));
    let m = metric.as_str();
    let mut reports = Vec::new();
    if matches!(task, EvalTask::Ed | EvalTask::Ee) {
        reports.push(ScoreReport { task: "ed", metric: m, prf: trigger_score(preds, golds, metric, &sentences) });
    }
    if matches!(task, EvalTask::Eae | EvalTask::Ee) {
        reports.push(ScoreReport { task: "eae", metric: m, prf: argument_score(preds, golds, metric, &sentences)? });
    }
    Ok(EvalOutcome { reports, warnings })
}

pub fn render_table(reports: &[ScoreReport]) -> String {
    let mut out = format!("{:<6} {:<7} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}\n", "task", "metric", "precision", "recall", "f1", "tp", "fp", "fn");
    for r in reports {
        out.push_str(&format!(
            "{:<6} {:<7} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}\n",
            r.task, r.metric, r.prf.precision, r.prf.recall, r.prf.f1, r.prf.tp, r.prf.fp, r.prf.fn_
        ));
    }
    if reports.iter().any(|r| r.metric == "types") {
        out.push_str("note: \"types\" is a span-overlap stand-in metric\n");
    }
    out
}

pub fn cmd_eval(pred: &Path, gold: &Path, task: EvalTask, metric: Metric, report: Option<&Path>) -> Result<EvalOutcome> {
    let preds = read_records(pred)?;
    let golds = read_records(gold)?;
    let outcome = evaluate(&preds, &golds, task, metric)?;
    if let Some(path) = report {
        let mut json = serde_json::to_string_pretty(&outcome.reports)?;
        json.push('\n');
        std::fs::write(path, json).with_context(|| format!("cannot write report {}", path.display()))?;
    }
    Ok(outcome)
}
