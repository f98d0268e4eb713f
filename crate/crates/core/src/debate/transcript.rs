//! Append-only record of every prompt, reply and engine event in a session.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::digest::text_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Ed,
    Eae,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ed => "ed",
            Self::Eae => "eae",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InitialOpinion,
    Retrieval,
    Gate,
    CrossExamination,
    Critique,
    Judgement,
    Adjudication,
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Prompt,
    Reply,
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task: TaskKind,
    pub round: u32,
    pub stage: Stage,
    pub role: String,
    pub kind: EntryKind,
    pub text: String,
    /// For prompts, the digest of the prompt; for replies, the digest of the
    /// prompt being answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

#[derive(Serialize)]
struct ExportLine<'a> {
    sentence_id: &'a str,
    #[serde(flatten)]
    entry: &'a TranscriptEntry,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records a prompt and returns its digest.
    pub fn prompt(&mut self, task: TaskKind, round: u32, stage: Stage, role: &str, text: &str) -> String {
        let digest = text_digest(text);
        self.push(TranscriptEntry {
            task,
            round,
            stage,
            role: role.to_string(),
            kind: EntryKind::Prompt,
            text: text.to_string(),
            prompt_digest: Some(digest.clone()),
        });
        digest
    }

    pub fn reply(&mut self, task: TaskKind, round: u32, stage: Stage, role: &str, text: &str, prompt_digest: String) {
        self.push(TranscriptEntry {
            task,
            round,
            stage,
            role: role.to_string(),
            kind: EntryKind::Reply,
            text: text.to_string(),
            prompt_digest: Some(prompt_digest),
        });
    }

    pub fn note(&mut self, task: TaskKind, round: u32, stage: Stage, role: &str, kind: EntryKind, text: impl Into<String>) {
        self.push(TranscriptEntry {
            task,
            round,
            stage,
            role: role.to_string(),
            kind,
            text: text.into(),
            prompt_digest: None,
        });
    }

    pub fn warnings(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Warning)
    }

    /// Writes one JSON object per entry, tagged with the sentence id.
    pub fn write_jsonl<W: Write>(&self, sentence_id: &str, mut out: W) -> io::Result<()> {
        for entry in &self.entries {
            let line = ExportLine { sentence_id, entry };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_tags_sentence() {
        let mut t = Transcript::new();
        let d = t.prompt(TaskKind::Ed, 0, Stage::InitialOpinion, "debater_a", "hi");
        t.reply(TaskKind::Ed, 0, Stage::InitialOpinion, "debater_a", "A: []", d.clone());
        let mut buf = Vec::new();
        t.write_jsonl("s1", &mut buf).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1]["sentence_id"], "s1");
        assert_eq!(lines[1]["kind"], "reply");
        assert_eq!(lines[1]["prompt_digest"], d.as_str());
        assert_eq!(lines[0]["stage"], "initial_opinion");
    }
}
