use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{check_messages, latest_user_message, BackendError, ChatBackend, ChatMessage};
use crate::text_digest;

/// One scripted reply. `matcher` is `"*"` (any message) or a substring the
/// latest user message must contain. Entries are consumed when used unless
/// `repeat` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: String,
    pub reply: String,
    #[serde(default)]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn once(matcher: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into(),
            reply: reply.into(),
            repeat: false,
        }
    }

    pub fn always(matcher: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            repeat: true,
            ..Self::once(matcher, reply)
        }
    }

    fn matches(&self, message: &str) -> bool {
        self.matcher == "*" || message.contains(&self.matcher)
    }
}

#[derive(Debug, Default)]
struct ScriptState {
    consumed: Vec<bool>,
    calls: Vec<Vec<ChatMessage>>,
}

/// Chat backend replaying a fixed script; calls are serialized so the script
/// is consumed in call order.
#[derive(Debug)]
pub struct ScriptedChat {
    entries: Vec<ScriptEntry>,
    state: Mutex<ScriptState>,
}

impl ScriptedChat {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = vec![false; entries.len()];
        Self {
            entries,
            state: Mutex::new(ScriptState {
                consumed,
                calls: Vec::new(),
            }),
        }
    }

    /// Every message list this backend has received, in call order.
    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().unwrap().calls.len()
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, BackendError> {
        check_messages(messages)?;
        let mut state = self.state.lock().unwrap();
        state.calls.push(messages.to_vec());
        let message = latest_user_message(messages);
        let mut any_available = false;
        for (i, entry) in self.entries.iter().enumerate() {
            if state.consumed[i] {
                continue;
            }
            any_available = true;
            if entry.matches(message) {
                if !entry.repeat {
                    state.consumed[i] = true;
                }
                return Ok(entry.reply.clone());
            }
        }
        if any_available {
            Err(BackendError::NoMatch {
                digest: text_digest(message),
            })
        } else {
            Err(BackendError::ScriptExhausted)
        }
    }
}
