//! Annotated reference sentences and the embedded index retrieval searches.
//!
//! Corpus files are JSON Lines:
//!
//! ```text
//! {"id": "s1", "text": "...", "split": "train",
//!  "events": [{"type": "Life:Die", "trigger": "killed",
//!              "arguments": [{"role": "Victim", "content": "..."}]}]}
//! ```
//!
//! Text is whitespace-normalized on load (tokens joined by single spaces), and
//! every trigger and argument span must occur as a substring of the
//! normalized text. Polarity is derived from the events list, never read.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, EmbeddingBackend};
use crate::ontology::EventTypeId;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),

    #[error("corpus line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("sentence {id}: span {span:?} does not occur in the text")]
    SpanNotInSentence { id: String, span: String },
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding of {id} is a zero vector")]
    ZeroVector { id: String },
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        Self {
            id: id.into(),
            text: tokens.join(" "),
            tokens,
        }
    }

    /// Whether `span` (whitespace-normalized) occurs in the sentence text.
    pub fn contains_span(&self, span: &str) -> bool {
        let span = normalize_whitespace(span);
        !span.is_empty() && self.text.contains(&span)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldArgument {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEvent {
    #[serde(rename = "type")]
    pub event_type: EventTypeId,
    pub trigger: String,
    #[serde(default)]
    pub arguments: Vec<GoldArgument>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldAnnotation {
    pub sentence_id: String,
    pub events: Vec<GoldEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Calib,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceEntry {
    pub sentence: Sentence,
    pub annotation: GoldAnnotation,
    pub split: Option<Split>,
    polarity: Polarity,
}

impl ReferenceEntry {
    pub fn new(sentence: Sentence, events: Vec<GoldEvent>, split: Option<Split>) -> Self {
        let polarity = if events.is_empty() {
            Polarity::Negative
        } else {
            Polarity::Positive
        };
        Self {
            annotation: GoldAnnotation {
                sentence_id: sentence.id.clone(),
                events,
            },
            sentence,
            split,
            polarity,
        }
    }

    pub fn id(&self) -> &str {
        &self.sentence.id
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn events(&self) -> &[GoldEvent] {
        &self.annotation.events
    }

    pub fn has_event_type(&self, event_type: &EventTypeId) -> bool {
        self.annotation
            .events
            .iter()
            .any(|e| &e.event_type == event_type)
    }

    pub fn to_record(&self) -> CorpusRecord {
        CorpusRecord {
            id: self.sentence.id.clone(),
            text: self.sentence.text.clone(),
            split: self.split,
            events: self.annotation.events.clone(),
        }
    }
}

/// On-disk line of a corpus or prediction file. Predictions omit `split`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default)]
    pub events: Vec<GoldEvent>,
}

impl CorpusRecord {
    pub fn into_entry(self) -> Result<ReferenceEntry, CorpusError> {
        let sentence = Sentence::new(self.id, &self.text);
        if sentence.text.is_empty() {
            return Err(CorpusError::SpanNotInSentence {
                id: sentence.id,
                span: String::new(),
            });
        }
        let mut events = self.events;
        for event in &mut events {
            event.trigger = normalize_whitespace(&event.trigger);
            check_span(&sentence, &event.trigger)?;
            for arg in &mut event.arguments {
                arg.content = normalize_whitespace(&arg.content);
                check_span(&sentence, &arg.content)?;
            }
        }
        Ok(ReferenceEntry::new(sentence, events, self.split))
    }
}

fn check_span(sentence: &Sentence, span: &str) -> Result<(), CorpusError> {
    if sentence.contains_span(span) {
        Ok(())
    } else {
        Err(CorpusError::SpanNotInSentence {
            id: sentence.id.clone(),
            span: span.to_string(),
        })
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<ReferenceEntry>, CorpusError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(raw).map_err(|e| CorpusError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        if normalize_whitespace(&record.text).is_empty() {
            return Err(CorpusError::Format {
                line: i + 1,
                message: "empty text".into(),
            });
        }
        entries.push(record.into_entry()?);
    }
    Ok(entries)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ReferenceEntry>, CorpusError> {
    parse_corpus(&fs::read_to_string(path)?)
}

/// Writes records as JSON Lines, one per line, in the given order.
pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a CorpusRecord>,
) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn entries_in_split(entries: &[ReferenceEntry], split: Split) -> Vec<ReferenceEntry> {
    entries
        .iter()
        .filter(|e| e.split == Some(split))
        .cloned()
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L2-normalizes a vector; `None` when the norm is zero or not finite.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = dot(v, v).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

/// Reference entries paired with unit-norm embeddings, in entry order.
#[derive(Debug, Clone)]
pub struct EmbeddedIndex {
    entries: Vec<ReferenceEntry>,
    vectors: Vec<Vec<f64>>,
    dimension: usize,
}

impl EmbeddedIndex {
    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ReferenceEntry, &[f64])> {
        self.entries
            .iter()
            .zip(self.vectors.iter().map(Vec::as_slice))
    }
}

pub fn build_index(
    entries: Vec<ReferenceEntry>,
    embedder: &dyn EmbeddingBackend,
) -> Result<EmbeddedIndex, IndexError> {
    let dimension = embedder.dimension();
    let mut vectors = Vec::with_capacity(entries.len());
    for entry in &entries {
        let raw = embedder.embed(&entry.sentence.text)?;
        if raw.len() != dimension {
            return Err(IndexError::DimensionMismatch {
                expected: dimension,
                actual: raw.len(),
            });
        }
        let unit = normalize(&raw).ok_or_else(|| IndexError::ZeroVector {
            id: entry.id().to_string(),
        })?;
        vectors.push(unit);
    }
    Ok(EmbeddedIndex {
        entries,
        vectors,
        dimension,
    })
}
