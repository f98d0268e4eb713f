//! Structured debater and judge answers with canonical renderings.

use serde::{Deserialize, Serialize};

use crate::corpus::{GoldArgument, GoldEvent, Sentence};
use crate::ontology::{EventDefinition, EventTypeId};

/// An event-detection answer: an event type with its one-word trigger, or
/// the explicit no-event answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerAnswer {
    pub event: Option<(EventTypeId, String)>,
}

impl TriggerAnswer {
    pub fn new(event_type: EventTypeId, trigger: impl Into<String>) -> Self {
        Self {
            event: Some((event_type, trigger.into())),
        }
    }

    pub fn no_event() -> Self {
        Self { event: None }
    }

    pub fn is_no_event(&self) -> bool {
        self.event.is_none()
    }

    pub fn event_type(&self) -> Option<&EventTypeId> {
        self.event.as_ref().map(|(t, _)| t)
    }

    /// `["type", "trigger"]` with JSON string escaping, or `[]`.
    pub fn render(&self) -> String {
        match &self.event {
            None => "[]".to_string(),
            Some((ty, trigger)) => format!(
                "[{}, {}]",
                serde_json::Value::from(ty.as_str()),
                serde_json::Value::from(trigger.as_str())
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentRow {
    pub role: String,
    pub content: Option<String>,
}

/// An argument table for one event. Canonical tables list every role of the
/// event type exactly once, in ontology order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentAnswer {
    pub event_type: EventTypeId,
    pub rows: Vec<ArgumentRow>,
}

pub const EAE_HEADER: [&str; 3] = ["event type", "argument role", "argument content"];
pub const ED_JUDGE_HEADER: [&str; 2] = ["event type", "event trigger"];
pub const SUMMARY_HEADER: [&str; 4] = [
    "event type",
    "event trigger",
    "argument role",
    "argument content",
];

impl ArgumentAnswer {
    /// Maps raw rows onto the role list of `def`. Unknown roles, repeated
    /// roles and contents that do not occur in `sentence` are dropped, each
    /// with a message pushed to `warnings`.
    pub fn canonical(
        rows: &[ArgumentRow],
        def: &EventDefinition,
        sentence: &Sentence,
        warnings: &mut Vec<String>,
    ) -> Self {
        let mut slots: Vec<Option<Option<String>>> = vec![None; def.roles.len()];
        for row in rows {
            let Some(i) = def.roles.iter().position(|r| r.eq_ignore_ascii_case(row.role.trim()))
            else {
                warnings.push(format!(
                    "dropped argument role {:?} not defined for {}",
                    row.role, def.type_id
                ));
                continue;
            };
            if slots[i].is_some() {
                warnings.push(format!("dropped repeated argument role {:?}", row.role));
                continue;
            }
            let content = match &row.content {
                Some(c) if sentence.contains_span(c) => Some(c.clone()),
                Some(c) => {
                    warnings.push(format!(
                        "dropped argument content {c:?} for role {} not found in sentence",
                        def.roles[i]
                    ));
                    None
                }
                None => None,
            };
            slots[i] = Some(content);
        }
        let rows = def
            .roles
            .iter()
            .zip(slots)
            .map(|(role, slot)| ArgumentRow {
                role: role.clone(),
                content: slot.flatten(),
            })
            .collect();
        Self {
            event_type: def.type_id.clone(),
            rows,
        }
    }

    pub fn filled(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.content.as_deref().map(|c| (r.role.as_str(), c)))
    }

    pub fn is_empty(&self) -> bool {
        self.filled().next().is_none()
    }

    pub fn render(&self) -> String {
        let mut out = format!("| {} |\n|---|---|---|", EAE_HEADER.join(" | "));
        for row in &self.rows {
            out.push_str(&format!(
                "\n| {} | {} | {} |",
                self.event_type,
                row.role,
                row.content.as_deref().unwrap_or("None")
            ));
        }
        out
    }

    pub fn to_gold_arguments(&self) -> Vec<GoldArgument> {
        self.filled()
            .map(|(role, content)| GoldArgument {
                role: role.to_string(),
                content: content.to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Trigger(TriggerAnswer),
    Arguments(ArgumentAnswer),
}

impl Answer {
    pub fn render(&self) -> String {
        match self {
            Self::Trigger(t) => t.render(),
            Self::Arguments(a) => a.render(),
        }
    }

    /// The no-event answer is exempt from risk scoring.
    pub fn is_no_event(&self) -> bool {
        matches!(self, Self::Trigger(t) if t.is_no_event())
    }

    pub fn event_type(&self) -> Option<&EventTypeId> {
        match self {
            Self::Trigger(t) => t.event_type(),
            Self::Arguments(a) => Some(&a.event_type),
        }
    }
}

/// A debater's current position. Unparseable replies become abstentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opinion {
    Answer(Answer),
    Abstain,
}

impl Opinion {
    pub fn answer(&self) -> Option<&Answer> {
        match self {
            Self::Answer(a) => Some(a),
            Self::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreedAnswer {
    Triggers(Vec<TriggerAnswer>),
    Arguments(ArgumentAnswer),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeVerdict {
    Agreement(AgreedAnswer),
    Continue,
    NoEvent,
}

/// Final structured output for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sentence_id: String,
    pub text: String,
    pub events: Vec<GoldEvent>,
}
