//! Model access: chat completion for agents, sentence embedding for
//! retrieval and completion scoring for risk calibration.
//!
//! Each capability is a trait with an HTTP implementation and a deterministic
//! offline one. Nothing outside this module touches the network.

mod embed;
mod http;
mod replay;
mod scoring;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::HashEmbedder;
pub use http::{HttpChat, HttpConfig, HttpEmbedder, HttpScorer};
pub use replay::{EmbedderSpec, ReplayBundle, ReplayError};
pub use scoring::{KeyedScorer, ScorerKey};
pub use scripted::{ScriptEntry, ScriptedChat};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),

    #[error("server returned HTTP {0}")]
    HttpStatus(u16),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },

    #[error("script exhausted")]
    ScriptExhausted,

    #[error("no script entry matches message {digest}")]
    NoMatch { digest: String },

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("chat message content is empty")]
    EmptyMessage,

    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: ChatRole, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(ChatRole::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(ChatRole::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(ChatRole::Assistant, content)
    }
}

pub(crate) fn check_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if messages.iter().any(|m| m.content.trim().is_empty()) {
        return Err(BackendError::EmptyMessage);
    }
    Ok(())
}

/// Latest user message in a conversation, or `""` when there is none.
pub fn latest_user_message(messages: &[ChatMessage]) -> &str {
    messages
        .iter()
        .rev()
        .find(|m| m.role == ChatRole::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    fn dimension(&self) -> usize;
}

pub trait ScoringBackend: Send + Sync {
    /// Sum over completion tokens of `-log p(token | prompt, prefix)`.
    fn negative_log_likelihood(&self, prompt: &str, completion: &str)
        -> Result<f64, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        (**self).complete(messages, temperature)
    }
}

impl<T: EmbeddingBackend + ?Sized> EmbeddingBackend for std::sync::Arc<T> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed(text)
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }
}

impl<T: ScoringBackend + ?Sized> ScoringBackend for std::sync::Arc<T> {
    fn negative_log_likelihood(
        &self,
        prompt: &str,
        completion: &str,
    ) -> Result<f64, BackendError> {
        (**self).negative_log_likelihood(prompt, completion)
    }
}
