//! Offline replay bundles: per-agent chat scripts plus scorer keys, loaded
//! from one JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BackendError, HashEmbedder, KeyedScorer, ScriptEntry, ScriptedChat};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read replay bundle: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed replay bundle: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderSpec {
    Hash { dimension: usize },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self::Hash { dimension: 256 }
    }
}

/// Scripts are keyed by agent name (`debater_a`, `debater_b`, `critic`,
/// `judge`, `summarizer`). Per-sentence scripts in `sessions` replace the
/// `default` script of the same agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayBundle {
    #[serde(default)]
    pub embedder: EmbedderSpec,
    #[serde(default)]
    pub scorer: KeyedScorer,
    #[serde(default)]
    pub default: BTreeMap<String, Vec<ScriptEntry>>,
    #[serde(default)]
    pub sessions: BTreeMap<String, BTreeMap<String, Vec<ScriptEntry>>>,
}

impl ReplayBundle {
    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn script_for(&self, sentence_id: &str, agent: &str) -> Vec<ScriptEntry> {
        self.sessions
            .get(sentence_id)
            .and_then(|s| s.get(agent))
            .or_else(|| self.default.get(agent))
            .cloned()
            .unwrap_or_default()
    }

    /// A fresh scripted backend for one agent in one session.
    pub fn chat_for(&self, sentence_id: &str, agent: &str) -> ScriptedChat {
        ScriptedChat::new(self.script_for(sentence_id, agent))
    }

    pub fn embedder(&self) -> Result<HashEmbedder, ReplayError> {
        match self.embedder {
            EmbedderSpec::Hash { dimension } => Ok(HashEmbedder::new(dimension)?),
        }
    }
}
