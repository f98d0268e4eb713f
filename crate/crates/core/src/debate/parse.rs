//! Parsers for debater replies, markdown tables and judge verdicts.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::answer::{
    AgreedAnswer, ArgumentAnswer, ArgumentRow, JudgeVerdict, TriggerAnswer, EAE_HEADER,
    ED_JUDGE_HEADER,
};
use crate::digest::text_digest;
use crate::ontology::EventTypeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no table found")]
    NoTableFound,
    #[error("table header does not match | {expected} |")]
    HeaderMismatch { expected: String },
    #[error("unparseable reply (digest {digest}): {reason}")]
    ParseFailure { digest: String, reason: String },
}

fn failure(text: &str, reason: impl Into<String>) -> ParseError {
    ParseError::ParseFailure {
        digest: text_digest(text),
        reason: reason.into(),
    }
}

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[^\[\]]*\]").unwrap());

fn straighten_quotes(text: &str) -> String {
    text.replace(['\u{201c}', '\u{201d}', '\u{201e}'], "\"")
}

/// Extracts the last answer in an event-detection reply: a two-element list
/// of quoted strings, or `[]` for no event.
pub fn parse_debater_ed(text: &str) -> Result<TriggerAnswer, ParseError> {
    let normalized = straighten_quotes(text);
    for m in BRACKETED.find_iter(&normalized).collect::<Vec<_>>().into_iter().rev() {
        let inner = m.as_str()[1..m.as_str().len() - 1].trim();
        if inner.is_empty() {
            return Ok(TriggerAnswer::no_event());
        }
        let Ok(items) = serde_json::from_str::<Vec<String>>(m.as_str()) else {
            continue;
        };
        let [ty, trigger] = items.as_slice() else {
            continue;
        };
        let (ty, trigger) = (ty.trim(), trigger.trim());
        if ty.is_empty() && trigger.is_empty() {
            return Ok(TriggerAnswer::no_event());
        }
        let Some(ty) = EventTypeId::new(ty) else {
            continue;
        };
        if trigger.is_empty() {
            continue;
        }
        return Ok(TriggerAnswer::new(ty, trigger));
    }
    Err(failure(text, "no event answer list"))
}

fn split_cells(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').map(|c| c.trim().to_string()).collect()
}

fn clean_cell(cell: &str) -> String {
    cell.trim()
        .trim_matches(|c| c == '*' || c == '`')
        .trim()
        .to_string()
}

fn header_key(cell: &str) -> String {
    clean_cell(cell).to_lowercase()
}

fn is_separator(cells: &[String]) -> bool {
    cells.iter().all(|c| {
        let c = c.trim();
        !c.is_empty() && c.chars().all(|ch| ch == '-' || ch == ':')
    })
}

/// Parses the first markdown table whose header matches `header`
/// (case-insensitive, emphasis ignored). Cells reading `None` or empty
/// become `None`; rows of the wrong width are skipped.
pub fn parse_table(text: &str, header: &[&str]) -> Result<Vec<Vec<Option<String>>>, ParseError> {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim_start().starts_with('|') {
            current.push(line);
        } else if !current.is_empty() {
            blocks.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(ParseError::NoTableFound);
    }
    for block in blocks {
        let head: Vec<String> = split_cells(block[0]).iter().map(|c| header_key(c)).collect();
        if head != header {
            continue;
        }
        let rows = block[1..]
            .iter()
            .map(|l| split_cells(l))
            .filter(|cells| !is_separator(cells) && cells.len() == header.len())
            .map(|cells| {
                cells
                    .iter()
                    .map(|c| {
                        let c = clean_cell(c);
                        (!c.is_empty() && !c.eq_ignore_ascii_case("none")).then_some(c)
                    })
                    .collect()
            })
            .collect();
        return Ok(rows);
    }
    Err(ParseError::HeaderMismatch {
        expected: header.join(" | "),
    })
}

/// Parses an argument table into raw rows plus the event type of the first
/// typed row.
pub fn parse_argument_table(
    text: &str,
) -> Result<(Option<EventTypeId>, Vec<ArgumentRow>), ParseError> {
    let table = parse_table(text, &EAE_HEADER)?;
    let mut event_type = None;
    let mut rows = Vec::new();
    for cells in table {
        if event_type.is_none() {
            event_type = cells[0].as_deref().and_then(EventTypeId::new);
        }
        let Some(role) = cells[1].clone() else {
            continue;
        };
        rows.push(ArgumentRow {
            role,
            content: cells[2].clone(),
        });
    }
    Ok((event_type, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Ed,
    Eae,
}

const CONTINUE_MARKERS: [&str; 3] = [
    "no agreement",
    "disagreement observed",
    "debate continues",
];

/// Reads a judge reply. Continuation sentinels take precedence over the
/// no-event sentinel, which takes precedence over a table. EAE tables are
/// returned uncanonicalized.
pub fn parse_judge(text: &str, kind: VerdictKind) -> Result<JudgeVerdict, ParseError> {
    let lower = text.to_lowercase();
    if CONTINUE_MARKERS.iter().any(|m| lower.contains(m)) {
        return Ok(JudgeVerdict::Continue);
    }
    if kind == VerdictKind::Ed && lower.contains("no event") {
        return Ok(JudgeVerdict::NoEvent);
    }
    match kind {
        VerdictKind::Ed => {
            let rows = parse_table(text, &ED_JUDGE_HEADER)?;
            let answers: Vec<TriggerAnswer> = rows
                .into_iter()
                .filter_map(|cells| {
                    let ty = EventTypeId::new(cells[0].as_deref()?)?;
                    Some(TriggerAnswer::new(ty, cells[1].clone()?))
                })
                .collect();
            if answers.is_empty() {
                return Err(failure(text, "agreement table has no complete row"));
            }
            Ok(JudgeVerdict::Agreement(AgreedAnswer::Triggers(answers)))
        }
        VerdictKind::Eae => {
            let (event_type, rows) = parse_argument_table(text)?;
            let event_type =
                event_type.ok_or_else(|| failure(text, "agreement table names no event type"))?;
            Ok(JudgeVerdict::Agreement(AgreedAnswer::Arguments(ArgumentAnswer {
                event_type,
                rows,
            })))
        }
    }
}
