//! Round-based multi-agent debate over one sentence.
//!
//! A task (event detection or argument extraction) proceeds in rounds:
//! debaters state opinions, the retrieval packet is broadcast to debaters and
//! the critic, answers are gated by the conformal threshold, debaters
//! cross-examine each other, the critic comments and the judge, seeing only
//! gated canonical answers, either declares agreement or lets the debate
//! continue. Detection runs first; argument extraction is chained for every
//! agreed event.

pub mod answer;
pub mod engine;
pub mod parse;
pub mod prompts;
pub mod transcript;

pub use answer::{
    AgreedAnswer, Answer, ArgumentAnswer, ArgumentRow, EventRecord, JudgeVerdict, Opinion,
    TriggerAnswer,
};
pub use engine::{
    calibration_input, debater_prompt, initial_state, retrieval_config, render_packet, scoring_input, AgentBinding, Agents,
    DebateConfig, DebateEngine, DebateError, DebateState, Resources, RiskObservation,
    SessionError, SessionMode, SessionOutput, SessionThresholds, SummarizerMode, TaskOutcome,
    TaskResult, TaskSpec,
};
pub use parse::{parse_debater_ed, parse_judge, parse_table, ParseError, VerdictKind};
pub use prompts::{render_prompt, render_text, PromptError, TemplateId};
pub use transcript::{EntryKind, Stage, TaskKind, Transcript, TranscriptEntry};
