//! Event schema: types, definitions, typical triggers and argument roles.
//!
//! The ontology is read from JSON Lines, one event type per line:
//!
//! ```text
//! {"type": "Life:Die", "definition": "...", "typical_triggers": ["die"], "roles": ["Agent", "Victim"]}
//! ```
//!
//! Unknown keys are ignored. Role order is preserved as written since prompts
//! enumerate roles in that order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("failed to read ontology: {0}")]
    Io(#[from] std::io::Error),

    #[error("ontology line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("duplicate event type {0}")]
    DuplicateType(EventTypeId),

    #[error("unknown event type {0}")]
    UnknownEventType(EventTypeId),
}

/// Event type name in `Parent:Subtype` form, compared by exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventTypeId(String);

impl EventTypeId {
    /// Returns `None` for an empty (or all-whitespace) name.
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            None
        } else {
            Some(Self(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventDefinition {
    pub type_id: EventTypeId,
    pub definition: String,
    pub typical_triggers: Vec<String>,
    pub roles: Vec<String>,
}

impl EventDefinition {
    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r == role)
    }
}

#[derive(Deserialize)]
struct OntologyRecord {
    #[serde(rename = "type")]
    type_id: String,
    definition: String,
    #[serde(default)]
    typical_triggers: Vec<String>,
    #[serde(default)]
    roles: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventOntology {
    definitions: BTreeMap<EventTypeId, EventDefinition>,
}

impl EventOntology {
    pub fn from_definitions(
        definitions: impl IntoIterator<Item = EventDefinition>,
    ) -> Result<Self, OntologyError> {
        let mut map = BTreeMap::new();
        for def in definitions {
            if map.contains_key(&def.type_id) {
                return Err(OntologyError::DuplicateType(def.type_id));
            }
            map.insert(def.type_id.clone(), def);
        }
        Ok(Self { definitions: map })
    }

    /// Parses ontology JSON Lines. Blank lines are skipped.
    pub fn parse_jsonl(text: &str) -> Result<Self, OntologyError> {
        let mut definitions = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: OntologyRecord =
                serde_json::from_str(raw).map_err(|e| OntologyError::Format {
                    line,
                    message: e.to_string(),
                })?;
            let def = validate_record(record, line)?;
            if definitions.contains_key(&def.type_id) {
                return Err(OntologyError::DuplicateType(def.type_id));
            }
            definitions.insert(def.type_id.clone(), def);
        }
        Ok(Self { definitions })
    }

    pub fn lookup(&self, id: &EventTypeId) -> Result<&EventDefinition, OntologyError> {
        self.definitions
            .get(id)
            .ok_or_else(|| OntologyError::UnknownEventType(id.clone()))
    }

    /// Lookup by raw name; unknown or empty names fail with `UnknownEventType`.
    pub fn lookup_str(&self, name: &str) -> Result<&EventDefinition, OntologyError> {
        match EventTypeId::new(name) {
            Some(id) => self.lookup(&id),
            None => Err(OntologyError::UnknownEventType(EventTypeId(name.to_string()))),
        }
    }

    pub fn contains(&self, id: &EventTypeId) -> bool {
        self.definitions.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.definitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.definitions.is_empty()
    }

    pub fn type_ids(&self) -> impl Iterator<Item = &EventTypeId> {
        self.definitions.keys()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &EventDefinition> {
        self.definitions.values()
    }
}

fn validate_record(record: OntologyRecord, line: usize) -> Result<EventDefinition, OntologyError> {
    let format = |message: &str| OntologyError::Format {
        line,
        message: message.to_string(),
    };
    let type_id = EventTypeId::new(record.type_id).ok_or_else(|| format("empty event type"))?;
    if record.definition.trim().is_empty() {
        return Err(format("empty definition"));
    }
    let mut seen = HashSet::new();
    for role in &record.roles {
        if !seen.insert(role.as_str()) {
            return Err(OntologyError::Format {
                line,
                message: format!("duplicate role {role}"),
            });
        }
    }
    Ok(EventDefinition {
        type_id,
        definition: record.definition,
        typical_triggers: record.typical_triggers,
        roles: record.roles,
    })
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<EventOntology, OntologyError> {
    let text = fs::read_to_string(path)?;
    EventOntology::parse_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIVORCE: &str = r#"{"type": "Life:Divorce", "definition": "officially divorced under the legal definition of divorce", "typical_triggers": ["divorce", "split"], "roles": ["Person", "Place"]}"#;

    #[test]
    fn parses_and_looks_up_definition() {
        let ont = EventOntology::parse_jsonl(DIVORCE).unwrap();
        let def = ont.lookup_str("Life:Divorce").unwrap();
        assert_eq!(
            def.definition,
            "officially divorced under the legal definition of divorce"
        );
        assert_eq!(def.roles, vec!["Person", "Place"]);
        assert_eq!(def.typical_triggers, vec!["divorce", "split"]);
    }

    #[test]
    fn empty_file_gives_empty_ontology() {
        let ont = EventOntology::parse_jsonl("").unwrap();
        assert!(ont.is_empty());
        assert!(matches!(
            ont.lookup_str("Life:Die"),
            Err(OntologyError::UnknownEventType(_))
        ));
    }

    #[test]
    fn duplicate_types_rejected() {
        let line = r#"{"type": "Life:Die", "definition": "x", "roles": []}"#;
        let text = format!("{line}\n{line}\n");
        match EventOntology::parse_jsonl(&text) {
            Err(OntologyError::DuplicateType(id)) => assert_eq!(id.as_str(), "Life:Die"),
            other => panic!("expected DuplicateType, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = format!("{DIVORCE}\nnot json\n");
        match EventOntology::parse_jsonl(&text) {
            Err(OntologyError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Format, got {other:?}"),
        }
        let dup_role = r#"{"type": "A:B", "definition": "x", "roles": ["R", "R"]}"#;
        assert!(matches!(
            EventOntology::parse_jsonl(dup_role),
            Err(OntologyError::Format { line: 1, .. })
        ));
        let empty_def = r#"{"type": "A:B", "definition": " ", "roles": []}"#;
        assert!(matches!(
            EventOntology::parse_jsonl(empty_def),
            Err(OntologyError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_keys_ignored() {
        let text = r#"{"type": "A:B", "definition": "x", "roles": ["R"], "extra": 1}"#;
        assert_eq!(EventOntology::parse_jsonl(text).unwrap().len(), 1);
    }
}
