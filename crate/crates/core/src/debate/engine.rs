//! Round state machine and per-sentence sessions.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::answer::{
    AgreedAnswer, Answer, ArgumentAnswer, EventRecord, JudgeVerdict, Opinion, TriggerAnswer,
    SUMMARY_HEADER,
};
use super::parse::{parse_argument_table, parse_debater_ed, parse_judge, parse_table, VerdictKind};
use super::prompts::{render_prompt, PromptError, TemplateId};
use super::transcript::{EntryKind, Stage, TaskKind, Transcript};
use crate::adacp::{accept, decay_threshold, risk_score, AdaCpError, RiskThreshold};
use crate::backends::{BackendError, ChatBackend, ChatMessage, EmbeddingBackend, ScoringBackend};
use crate::corpus::{normalize, EmbeddedIndex, GoldEvent, ReferenceEntry, Sentence};
use crate::drag::{
    decay_radius, gather_event_info, DragConfig, DragError, RetrievalMode, RetrievalRequest,
    RetrievalResult,
};
use crate::ontology::{EventDefinition, EventOntology, EventTypeId};

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("backend failure for {agent}: {source}")]
    Backend {
        agent: String,
        #[source]
        source: BackendError,
    },
    #[error("embedding failed: {0}")]
    Embedding(#[source] BackendError),
    #[error("sentence {0} embeds to the zero vector")]
    ZeroQuery(String),
    #[error(transparent)]
    AdaCp(#[from] AdaCpError),
    #[error(transparent)]
    Drag(#[from] DragError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid debate configuration: {0}")]
    Config(String),
}

/// A failed session keeps everything recorded up to the failure.
#[derive(Debug, Error)]
#[error("session {sentence_id} aborted: {error}")]
pub struct SessionError {
    pub sentence_id: String,
    #[source]
    pub error: DebateError,
    pub transcript: Transcript,
}

#[derive(Clone)]
pub struct AgentBinding {
    pub name: String,
    pub backend: Arc<dyn ChatBackend>,
    pub temperature: f64,
}

impl AgentBinding {
    pub fn new(name: impl Into<String>, backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            name: name.into(),
            backend,
            temperature: 0.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

#[derive(Clone)]
pub struct Agents {
    pub debaters: Vec<AgentBinding>,
    pub critic: AgentBinding,
    pub judge: AgentBinding,
    pub summarizer: Option<AgentBinding>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummarizerMode {
    #[default]
    Deterministic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebateConfig {
    pub max_rounds: u32,
    /// Diversity-constrained retrieval; when off, the nearest examples are used.
    pub use_drag: bool,
    /// Conformal gating of debater answers.
    pub use_adacp: bool,
    /// Shrink the clustering radius and recompute the top-K list every round.
    pub recluster: bool,
    pub summarizer: SummarizerMode,
    /// Triggers containing whitespace are treated as abstentions.
    pub single_token_triggers: bool,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            use_drag: true,
            use_adacp: true,
            recluster: true,
            summarizer: SummarizerMode::Deterministic,
            single_token_triggers: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionThresholds {
    pub ed: RiskThreshold,
    pub eae: RiskThreshold,
}

#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub ontology: &'a EventOntology,
    pub index: &'a EmbeddedIndex,
    pub embedder: &'a dyn EmbeddingBackend,
    pub scorer: &'a dyn ScoringBackend,
}

/// One risk evaluation made by the gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskObservation {
    pub task: TaskKind,
    pub round: u32,
    pub stage: Stage,
    pub agent: String,
    pub risk: f64,
    pub threshold: RiskThreshold,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Agreed(AgreedAnswer),
    NoEvent,
    /// Round cap reached; the lowest-risk answer that passed the gate.
    Adjudicated(Answer),
    /// Round cap reached with no usable answer.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: TaskKind,
    pub outcome: TaskOutcome,
    pub rounds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionMode {
    Full,
    DetectionOnly,
    /// Argument extraction for the given (type, trigger) pairs.
    ArgumentsOnly(Vec<(EventTypeId, String)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub record: EventRecord,
    pub transcript: Transcript,
    pub risks: Vec<RiskObservation>,
    pub tasks: Vec<TaskResult>,
}

/// The task under debate.
#[derive(Debug, Clone, Copy)]
pub enum TaskSpec<'s> {
    Ed,
    Eae {
        def: &'s EventDefinition,
        trigger: &'s str,
    },
}

impl TaskSpec<'_> {
    pub fn kind(&self) -> TaskKind {
        match self {
            Self::Ed => TaskKind::Ed,
            Self::Eae { .. } => TaskKind::Eae,
        }
    }
}

fn debater_letter(i: usize) -> char {
    (b'A' + (i % 26) as u8) as char
}

fn debater_label(i: usize) -> String {
    format!("Debater {}", debater_letter(i))
}

fn debater_key(i: usize) -> String {
    format!("debater_{}", debater_letter(i).to_ascii_lowercase())
}

/// The first prompt a debater receives, with `role` as the answer label.
pub fn debater_prompt(
    spec: TaskSpec<'_>,
    sentence: &Sentence,
    ontology: &EventOntology,
    role: &str,
) -> Result<String, PromptError> {
    match spec {
        TaskSpec::Ed => {
            let types: Vec<&str> = ontology.type_ids().map(|t| t.as_str()).collect();
            let task = render_prompt(
                TemplateId::DebaterEd,
                &[("[SENT]", &sentence.text), ("[ROLE]", role)],
            )?;
            let list = render_prompt(TemplateId::EventTypeList, &[("[EVENT TYPES]", &types.join(", "))])?;
            Ok(format!("{task}\n{list}"))
        }
        TaskSpec::Eae { def, trigger } => render_prompt(
            TemplateId::DebaterEae,
            &[
                ("[SENT]", &sentence.text),
                ("{event type}", def.type_id.as_str()),
                ("{trigger}", trigger),
                ("{role list}", &def.roles.join(", ")),
            ],
        ),
    }
}

/// Debater-neutral task input used for risk scoring and calibration.
pub fn scoring_input(
    spec: TaskSpec<'_>,
    sentence: &Sentence,
    ontology: &EventOntology,
) -> Result<String, PromptError> {
    debater_prompt(spec, sentence, ontology, "Answer")
}

fn example_answer(entry: &ReferenceEntry, spec: TaskSpec<'_>) -> String {
    match spec {
        TaskSpec::Ed => {
            if entry.events().is_empty() {
                return "[]".to_string();
            }
            entry
                .events()
                .iter()
                .map(|e| TriggerAnswer::new(e.event_type.clone(), e.trigger.clone()).render())
                .collect::<Vec<_>>()
                .join(", ")
        }
        TaskSpec::Eae { def, .. } => {
            let event = entry.events().iter().find(|e| e.event_type == def.type_id);
            let rows: Vec<_> = event
                .map(|e| {
                    e.arguments
                        .iter()
                        .map(|a| super::answer::ArgumentRow {
                            role: a.role.clone(),
                            content: Some(a.content.clone()),
                        })
                        .collect()
                })
                .unwrap_or_default();
            let mut ignored = Vec::new();
            ArgumentAnswer::canonical(&rows, def, &entry.sentence, &mut ignored).render()
        }
    }
}

/// Text of a retrieval packet as shown to debaters and the critic.
pub fn render_packet(result: &RetrievalResult, spec: TaskSpec<'_>) -> String {
    let mut out = String::new();
    if !result.definitions.is_empty() {
        out.push_str("Event definitions:");
        for def in &result.definitions {
            out.push_str(&format!("\n- {}: {}", def.type_id, def.definition));
            if !def.typical_triggers.is_empty() {
                out.push_str(&format!(" Typical triggers: {}.", def.typical_triggers.join(", ")));
            }
        }
    }
    if !result.examples.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str("Examples:");
        for entry in &result.examples {
            let answer = example_answer(entry, spec);
            let sep = if answer.contains('\n') { "\n" } else { " " };
            out.push_str(&format!(
                "\n- Example: \"{}\" Answer:{sep}{answer}",
                entry.sentence.text
            ));
        }
    }
    out
}

/// The retrieval settings actually used: nearest-neighbour retrieval when
/// diversity selection is disabled.
pub fn retrieval_config(drag: &DragConfig, use_drag: bool) -> DragConfig {
    let mut drag = drag.clone();
    if !use_drag {
        drag.mode = RetrievalMode::Nearest;
    }
    drag
}

fn query_vector(embedder: &dyn EmbeddingBackend, sentence: &Sentence) -> Result<Vec<f64>, DebateError> {
    let raw = embedder.embed(&sentence.text).map_err(DebateError::Embedding)?;
    normalize(&raw).ok_or_else(|| DebateError::ZeroQuery(sentence.id.clone()))
}

/// Scoring prompt for one calibration item: the debater-neutral task input
/// plus the round-0 retrieval packet for the gold event types.
pub fn calibration_input(
    res: Resources<'_>,
    drag: &DragConfig,
    spec: TaskSpec<'_>,
    sentence: &Sentence,
    event_types: &[EventTypeId],
) -> Result<String, DebateError> {
    let query = query_vector(res.embedder, sentence)?;
    let required = match spec {
        TaskSpec::Eae { def, .. } => Some(&def.type_id),
        TaskSpec::Ed => None,
    };
    let request = RetrievalRequest {
        query: &query,
        radius: drag.initial_radius,
        exclude: Some(sentence),
        required_type: required,
        frozen_topk: None,
    };
    let result = gather_event_info(event_types, res.ontology, res.index, &request, drag)?;
    let input = scoring_input(spec, sentence, res.ontology)?;
    Ok(crate::adacp::render_scoring_prompt(&input, &render_packet(&result, spec)))
}

/// Mutable state of one debate task, advanced one round at a time.
#[derive(Debug, Clone)]
pub struct DebateState {
    pub task: TaskKind,
    pub round: u32,
    pub radius: f64,
    pub threshold: RiskThreshold,
    pub opinions: Vec<Opinion>,
    pub statements: Vec<String>,
    /// Whether each debater's current answer failed the gate this round.
    pub gated: Vec<bool>,
    pub risks: Vec<Option<f64>>,
    pub critic_statement: Option<String>,
    histories: Vec<Vec<ChatMessage>>,
    critic_history: Vec<ChatMessage>,
    frozen_topk: Option<Vec<usize>>,
    retrieved_strings: BTreeSet<String>,
    gated_renders: Vec<String>,
}

impl DebateState {
    fn new(task: TaskKind, debaters: usize, radius: f64, threshold: RiskThreshold) -> Self {
        Self {
            task,
            round: 0,
            radius,
            threshold,
            opinions: vec![Opinion::Abstain; debaters],
            statements: vec![String::new(); debaters],
            gated: vec![false; debaters],
            risks: vec![None; debaters],
            critic_statement: None,
            histories: vec![Vec::new(); debaters],
            critic_history: Vec::new(),
            frozen_topk: None,
            retrieved_strings: BTreeSet::new(),
            gated_renders: Vec::new(),
        }
    }
}

/// Session-wide log shared by all tasks of one sentence.
#[derive(Debug, Default)]
struct SessionLog {
    transcript: Transcript,
    risks: Vec<RiskObservation>,
}

impl SessionLog {
    fn warn(&mut self, task: TaskKind, round: u32, stage: Stage, role: &str, text: impl Into<String>) {
        self.transcript.note(task, round, stage, role, EntryKind::Warning, text);
    }

    fn info(&mut self, task: TaskKind, round: u32, stage: Stage, role: &str, text: impl Into<String>) {
        self.transcript.note(task, round, stage, role, EntryKind::Info, text);
    }
}

pub struct DebateEngine<'a> {
    agents: &'a Agents,
    res: Resources<'a>,
    config: DebateConfig,
    drag: DragConfig,
    beta: f64,
    thresholds: SessionThresholds,
}

impl<'a> DebateEngine<'a> {
    pub fn new(
        agents: &'a Agents,
        res: Resources<'a>,
        config: DebateConfig,
        drag: DragConfig,
        beta: f64,
        thresholds: SessionThresholds,
    ) -> Result<Self, DebateError> {
        if agents.debaters.len() < 2 {
            return Err(DebateError::Config("at least two debaters are required".into()));
        }
        if config.max_rounds == 0 {
            return Err(DebateError::Config("max_rounds must be at least 1".into()));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(DebateError::AdaCp(AdaCpError::InvalidDecay(beta)));
        }
        if config.summarizer == SummarizerMode::Llm && agents.summarizer.is_none() {
            return Err(DebateError::Config("llm summarizer mode needs a summarizer agent".into()));
        }
        drag.validate()?;
        Ok(Self {
            agents,
            res,
            config,
            drag,
            beta,
            thresholds,
        })
    }

    pub fn config(&self) -> &DebateConfig {
        &self.config
    }

    fn effective_drag(&self) -> DragConfig {
        retrieval_config(&self.drag, self.config.use_drag)
    }

    fn query_vector(&self, sentence: &Sentence) -> Result<Vec<f64>, DebateError> {
        query_vector(self.res.embedder, sentence)
    }

    #[allow(clippy::too_many_arguments)]
    fn call(
        &self,
        log: &mut SessionLog,
        task: TaskKind,
        round: u32,
        stage: Stage,
        role: &str,
        agent: &AgentBinding,
        history: &mut Vec<ChatMessage>,
        message: String,
    ) -> Result<String, DebateError> {
        let digest = log.transcript.prompt(task, round, stage, role, &message);
        history.push(ChatMessage::user(message));
        let reply = agent
            .backend
            .complete(history, agent.temperature)
            .map_err(|source| DebateError::Backend {
                agent: agent.name.clone(),
                source,
            })?;
        log.transcript.reply(task, round, stage, role, &reply, digest);
        history.push(ChatMessage::assistant(reply.clone()));
        Ok(reply)
    }

    fn parse_opinion(
        &self,
        log: &mut SessionLog,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        round: u32,
        stage: Stage,
        role: &str,
        reply: &str,
    ) -> Opinion {
        let task = spec.kind();
        match spec {
            TaskSpec::Ed => match parse_debater_ed(reply) {
                Ok(t) => {
                    if let Some((ty, trigger)) = &t.event {
                        let problem = if !self.res.ontology.contains(ty) {
                            Some(format!("event type {ty} is not in the ontology"))
                        } else if self.config.single_token_triggers
                            && trigger.split_whitespace().nth(1).is_some()
                        {
                            Some(format!("trigger {trigger:?} is not a single token"))
                        } else {
                            None
                        };
                        if let Some(p) = problem {
                            log.warn(task, round, stage, role, format!("abstention: {p}"));
                            return Opinion::Abstain;
                        }
                    }
                    Opinion::Answer(Answer::Trigger(t))
                }
                Err(e) => {
                    log.warn(task, round, stage, role, format!("abstention: {e}"));
                    Opinion::Abstain
                }
            },
            TaskSpec::Eae { def, .. } => match parse_argument_table(reply) {
                Ok((_, rows)) => {
                    let mut warnings = Vec::new();
                    let answer = ArgumentAnswer::canonical(&rows, def, sentence, &mut warnings);
                    for w in warnings {
                        log.warn(task, round, stage, role, w);
                    }
                    Opinion::Answer(Answer::Arguments(answer))
                }
                Err(e) => {
                    log.warn(task, round, stage, role, format!("abstention: {e}"));
                    Opinion::Abstain
                }
            },
        }
    }

    /// Scores `answer` and decides it against the current threshold.
    #[allow(clippy::too_many_arguments)]
    fn judge_risk(
        &self,
        log: &mut SessionLog,
        state: &DebateState,
        stage: Stage,
        agent: &str,
        input: &str,
        packet: &str,
        answer: &Answer,
    ) -> Result<Option<(f64, bool)>, DebateError> {
        if !self.config.use_adacp || answer.is_no_event() {
            return Ok(None);
        }
        let risk = risk_score(self.res.scorer, input, packet, &answer.render())?;
        let accepted = accept(risk, &state.threshold);
        log.risks.push(RiskObservation {
            task: state.task,
            round: state.round,
            stage,
            agent: agent.to_string(),
            risk,
            threshold: state.threshold,
            accepted,
        });
        let verdict = if accepted { "accepted" } else { "rejected" };
        log.info(
            state.task,
            state.round,
            Stage::Gate,
            agent,
            format!("risk {risk:.6} vs threshold {} ({verdict})", state.threshold.value),
        );
        Ok(Some((risk, accepted)))
    }

    fn gate_opinions(
        &self,
        log: &mut SessionLog,
        state: &mut DebateState,
        stage: Stage,
        input: &str,
        packet: &str,
    ) -> Result<(), DebateError> {
        for i in 0..state.opinions.len() {
            state.gated[i] = false;
            state.risks[i] = None;
            let Some(answer) = state.opinions[i].answer().cloned() else {
                continue;
            };
            if let Some((risk, accepted)) =
                self.judge_risk(log, state, stage, &debater_key(i), input, packet, &answer)?
            {
                state.risks[i] = Some(risk);
                state.gated[i] = !accepted;
                if !accepted {
                    state.gated_renders.push(answer.render());
                }
            }
        }
        Ok(())
    }

    fn statement_for_peers(&self, state: &DebateState, i: usize) -> String {
        if state.gated[i] {
            "(answer withheld)".to_string()
        } else {
            state.statements[i].clone()
        }
    }

    fn retrieve(
        &self,
        log: &mut SessionLog,
        state: &mut DebateState,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        query: &[f64],
    ) -> Result<String, DebateError> {
        let drag = self.effective_drag();
        let types: Vec<EventTypeId> = match spec {
            TaskSpec::Ed => state
                .opinions
                .iter()
                .filter_map(|o| o.answer().and_then(|a| a.event_type()).cloned())
                .collect(),
            TaskSpec::Eae { def, .. } => vec![def.type_id.clone()],
        };
        let required = match spec {
            TaskSpec::Eae { def, .. } => Some(&def.type_id),
            TaskSpec::Ed => None,
        };
        let radius = if self.config.recluster {
            state.radius
        } else {
            drag.initial_radius
        };
        let request = RetrievalRequest {
            query,
            radius,
            exclude: Some(sentence),
            required_type: required,
            frozen_topk: state.frozen_topk.as_deref(),
        };
        let result = gather_event_info(&types, self.res.ontology, self.res.index, &request, &drag)?;
        if state.frozen_topk.is_none() && (drag.freeze_topk || !self.config.recluster) {
            state.frozen_topk = Some(result.topk_positions.clone());
        }
        for def in &result.definitions {
            state.retrieved_strings.insert(def.definition.clone());
        }
        for entry in &result.examples {
            state.retrieved_strings.insert(entry.sentence.text.clone());
        }
        for ty in &result.unknown_types {
            log.warn(state.task, state.round, Stage::Retrieval, "retriever", format!("unknown event type {ty}"));
        }
        let packet = render_packet(&result, spec);
        log.info(
            state.task,
            state.round,
            Stage::Retrieval,
            "retriever",
            format!(
                "radius {} clusters {} examples {}\n{packet}",
                result.radius_used,
                result.cluster_count,
                result.examples.len()
            ),
        );
        Ok(packet)
    }

    fn redact(&self, state: &DebateState, text: &str) -> String {
        let mut out = text.to_string();
        let mut needles: Vec<&String> = state
            .retrieved_strings
            .iter()
            .chain(state.gated_renders.iter())
            .filter(|s| !s.trim().is_empty() && s.as_str() != "[]")
            .collect();
        needles.sort_by_key(|s| std::cmp::Reverse(s.len()));
        for n in needles {
            out = out.replace(n.as_str(), "[withheld]");
        }
        out
    }

    fn answer_for_judge(&self, state: &DebateState, i: usize) -> String {
        if state.gated[i] {
            return "(answer withheld)".to_string();
        }
        match &state.opinions[i] {
            Opinion::Abstain => "(no answer)".to_string(),
            Opinion::Answer(a) => {
                let r = a.render();
                if r.contains('\n') {
                    format!("\n{r}")
                } else {
                    r
                }
            }
        }
    }

    /// Validates an agreement against the sentence and the current gate;
    /// returns `None` when nothing survives.
    fn validate_agreement(
        &self,
        log: &mut SessionLog,
        state: &DebateState,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        input: &str,
        packet: &str,
        agreed: AgreedAnswer,
    ) -> Result<Option<AgreedAnswer>, DebateError> {
        let (task, round) = (state.task, state.round);
        match (agreed, spec) {
            (AgreedAnswer::Triggers(rows), TaskSpec::Ed) => {
                let mut kept: Vec<TriggerAnswer> = Vec::new();
                for t in rows {
                    let Some((ty, trigger)) = &t.event else { continue };
                    if !self.res.ontology.contains(ty) || !sentence.contains_span(trigger) {
                        log.warn(task, round, Stage::Judgement, "judge", format!("dropped agreed row {}", t.render()));
                        continue;
                    }
                    if kept.contains(&t) {
                        continue;
                    }
                    let answer = Answer::Trigger(t.clone());
                    if let Some((_, false)) = self.judge_risk(log, state, Stage::Judgement, "judge", input, packet, &answer)? {
                        log.warn(task, round, Stage::Judgement, "judge", format!("agreed row {} failed the gate", t.render()));
                        continue;
                    }
                    kept.push(t);
                }
                Ok((!kept.is_empty()).then_some(AgreedAnswer::Triggers(kept)))
            }
            (AgreedAnswer::Arguments(raw), TaskSpec::Eae { def, .. }) => {
                let mut warnings = Vec::new();
                let table = ArgumentAnswer::canonical(&raw.rows, def, sentence, &mut warnings);
                for w in warnings {
                    log.warn(task, round, Stage::Judgement, "judge", w);
                }
                let answer = Answer::Arguments(table.clone());
                if let Some((_, false)) = self.judge_risk(log, state, Stage::Judgement, "judge", input, packet, &answer)? {
                    log.warn(task, round, Stage::Judgement, "judge", "agreed table failed the gate");
                    return Ok(None);
                }
                Ok(Some(AgreedAnswer::Arguments(table)))
            }
            _ => Ok(None),
        }
    }

    /// Runs one full round and advances the state. Returns the verdict after
    /// validation; gated or invalid agreements become `Continue`.
    pub fn run_round(
        &self,
        state: &mut DebateState,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        query: &[f64],
        transcript: &mut Transcript,
        risks: &mut Vec<RiskObservation>,
    ) -> Result<JudgeVerdict, DebateError> {
        let mut log = SessionLog {
            transcript: std::mem::take(transcript),
            risks: std::mem::take(risks),
        };
        let result = self.round_inner(&mut log, state, spec, sentence, query);
        *transcript = log.transcript;
        *risks = log.risks;
        result
    }

    fn round_inner(
        &self,
        log: &mut SessionLog,
        state: &mut DebateState,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        query: &[f64],
    ) -> Result<JudgeVerdict, DebateError> {
        let task = spec.kind();
        let round = state.round;
        let n = self.agents.debaters.len();
        let input = scoring_input(spec, sentence, self.res.ontology)?;
        state.gated_renders.clear();

        if round == 0 {
            for i in 0..n {
                let agent = &self.agents.debaters[i];
                let prompt = debater_prompt(spec, sentence, self.res.ontology, &debater_letter(i).to_string())?;
                let key = debater_key(i);
                let reply = self.call(log, task, round, Stage::InitialOpinion, &key, agent, &mut state.histories[i], prompt)?;
                state.opinions[i] = self.parse_opinion(log, spec, sentence, round, Stage::InitialOpinion, &key, &reply);
                state.statements[i] = reply;
            }
        }

        let packet = self.retrieve(log, state, spec, sentence, query)?;
        self.gate_opinions(log, state, Stage::InitialOpinion, &input, &packet)?;

        let format = match spec {
            TaskSpec::Ed => TemplateId::AnswerFormatEd,
            TaskSpec::Eae { .. } => TemplateId::AnswerFormatEae,
        };
        let gated_before = state.gated.clone();
        let peers_snapshot: Vec<String> = (0..n).map(|j| self.statement_for_peers(state, j)).collect();
        for i in 0..n {
            let agent = &self.agents.debaters[i];
            let letter = debater_letter(i).to_string();
            let mut msg = String::new();
            if !packet.is_empty() {
                msg.push_str(&packet);
                msg.push_str("\n\n");
            }
            msg.push_str("Responses from the other agents:");
            for (j, statement) in peers_snapshot.iter().enumerate() {
                if j != i {
                    msg.push_str(&format!("\n{}: {}", debater_label(j), statement));
                }
            }
            if let Some(c) = &state.critic_statement {
                msg.push_str(&format!("\nCritic: {c}"));
            }
            msg.push_str("\n\n");
            if gated_before[i] {
                let rendered = state.opinions[i].answer().map(Answer::render).unwrap_or_default();
                msg.push_str(&render_prompt(TemplateId::Revise, &[("[ANSWER]", &rendered)])?);
            } else {
                msg.push_str(TemplateId::DebaterCrossExamination.text());
            }
            msg.push('\n');
            msg.push_str(&render_prompt(format, &[("[ROLE]", &letter)])?);
            let key = debater_key(i);
            let reply = self.call(log, task, round, Stage::CrossExamination, &key, agent, &mut state.histories[i], msg)?;
            state.opinions[i] = self.parse_opinion(log, spec, sentence, round, Stage::CrossExamination, &key, &reply);
            state.statements[i] = reply;
        }
        self.gate_opinions(log, state, Stage::CrossExamination, &input, &packet)?;

        let mut critic_msg = String::new();
        if !packet.is_empty() {
            critic_msg.push_str(&packet);
            critic_msg.push_str("\n\n");
        }
        critic_msg.push_str("Responses:");
        for i in 0..n {
            critic_msg.push_str(&format!("\n{}: {}", debater_label(i), self.statement_for_peers(state, i)));
        }
        critic_msg.push_str("\n\n");
        match spec {
            TaskSpec::Ed => {
                critic_msg.push_str(&render_prompt(TemplateId::CriticEd, &[("[SENT]", &sentence.text)])?);
                critic_msg.push(' ');
                critic_msg.push_str(TemplateId::CriticCrossExaminationEd.text());
            }
            TaskSpec::Eae { .. } => {
                critic_msg.push_str(&render_prompt(TemplateId::CriticEae, &[("[SENT]", &sentence.text)])?);
            }
        }
        let critic = &self.agents.critic;
        let critic_reply = self.call(log, task, round, Stage::Critique, "critic", critic, &mut state.critic_history, critic_msg)?;
        state.critic_statement = Some(critic_reply.clone());

        let mut judge_msg = String::from("Responses:");
        for i in 0..n {
            judge_msg.push_str(&format!("\n{}: {}", debater_label(i), self.answer_for_judge(state, i)));
        }
        judge_msg.push_str(&format!("\nCritic: {}", self.redact(state, &critic_reply)));
        judge_msg.push_str("\n\n");
        let (judge_template, verdict_kind) = match spec {
            TaskSpec::Ed => (TemplateId::JudgeEd, VerdictKind::Ed),
            TaskSpec::Eae { .. } => (TemplateId::JudgeEae, VerdictKind::Eae),
        };
        judge_msg.push_str(judge_template.text());
        let mut judge_history = Vec::new();
        let judge_reply = self.call(log, task, round, Stage::Judgement, "judge", &self.agents.judge, &mut judge_history, judge_msg)?;

        let verdict = match parse_judge(&judge_reply, verdict_kind) {
            Ok(JudgeVerdict::Agreement(agreed)) => {
                match self.validate_agreement(log, state, spec, sentence, &input, &packet, agreed)? {
                    Some(a) => JudgeVerdict::Agreement(a),
                    None => JudgeVerdict::Continue,
                }
            }
            Ok(v) => v,
            Err(e) => {
                log.warn(task, round, Stage::Judgement, "judge", format!("treated as continue: {e}"));
                JudgeVerdict::Continue
            }
        };
        log.info(task, round, Stage::Judgement, "engine", format!("verdict: {}", verdict_label(&verdict)));

        state.round += 1;
        if self.config.recluster {
            state.radius = decay_radius(state.radius, self.drag.radius_decay);
        }
        state.threshold = decay_threshold(state.threshold, self.beta);
        Ok(verdict)
    }

    fn adjudicate(&self, log: &mut SessionLog, state: &DebateState) -> TaskOutcome {
        let n = state.opinions.len();
        let outcome = if self.config.use_adacp {
            let best = (0..n)
                .filter(|&i| !state.gated[i])
                .filter_map(|i| Some((state.risks[i]?, i)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match best {
                Some((_, i)) => TaskOutcome::Adjudicated(state.opinions[i].answer().cloned().unwrap()),
                None if state.task == TaskKind::Ed
                    && (0..n).any(|i| {
                        !state.gated[i] && state.opinions[i].answer().is_some_and(Answer::is_no_event)
                    }) =>
                {
                    TaskOutcome::NoEvent
                }
                None => TaskOutcome::Empty,
            }
        } else {
            let answers: Vec<&Answer> = state.opinions.iter().filter_map(Opinion::answer).collect();
            let best = answers
                .iter()
                .enumerate()
                .max_by_key(|(i, a)| (answers.iter().filter(|b| b == a).count(), std::cmp::Reverse(*i)))
                .map(|(_, a)| (*a).clone());
            match best {
                Some(a) if a.is_no_event() => TaskOutcome::NoEvent,
                Some(a) => TaskOutcome::Adjudicated(a),
                None => TaskOutcome::Empty,
            }
        };
        let last = state.round.saturating_sub(1);
        log.info(state.task, last, Stage::Adjudication, "engine", format!("round cap reached: {outcome:?}"));
        outcome
    }

    fn run_task(
        &self,
        log: &mut SessionLog,
        spec: TaskSpec<'_>,
        sentence: &Sentence,
        query: &[f64],
    ) -> Result<TaskResult, DebateError> {
        let threshold = match spec {
            TaskSpec::Ed => self.thresholds.ed,
            TaskSpec::Eae { .. } => self.thresholds.eae,
        };
        let threshold = if self.config.use_adacp {
            threshold
        } else {
            RiskThreshold::accept_all()
        };
        let mut state = DebateState::new(spec.kind(), self.agents.debaters.len(), self.drag.initial_radius, threshold);
        while state.round < self.config.max_rounds {
            let verdict = self.round_inner(log, &mut state, spec, sentence, query)?;
            let outcome = match verdict {
                JudgeVerdict::Continue => continue,
                JudgeVerdict::NoEvent => TaskOutcome::NoEvent,
                JudgeVerdict::Agreement(a) => TaskOutcome::Agreed(a),
            };
            return Ok(TaskResult {
                task: spec.kind(),
                outcome,
                rounds: state.round,
            });
        }
        let outcome = self.adjudicate(log, &state);
        Ok(TaskResult {
            task: spec.kind(),
            outcome,
            rounds: state.round,
        })
    }

    fn detected_events(outcome: &TaskOutcome) -> Vec<(EventTypeId, String)> {
        let triggers: Vec<TriggerAnswer> = match outcome {
            TaskOutcome::Agreed(AgreedAnswer::Triggers(rows)) => rows.clone(),
            TaskOutcome::Adjudicated(Answer::Trigger(t)) => vec![t.clone()],
            _ => Vec::new(),
        };
        triggers.into_iter().filter_map(|t| t.event).collect()
    }

    fn extracted_arguments(outcome: &TaskOutcome) -> Option<ArgumentAnswer> {
        match outcome {
            TaskOutcome::Agreed(AgreedAnswer::Arguments(a))
            | TaskOutcome::Adjudicated(Answer::Arguments(a)) => Some(a.clone()),
            _ => None,
        }
    }

    /// Debates one sentence: detection, then argument extraction per agreed
    /// event, then the summary merge.
    pub fn run_session(&self, sentence: &Sentence, mode: SessionMode) -> Result<SessionOutput, SessionError> {
        let mut log = SessionLog::default();
        let mut tasks = Vec::new();
        match self.session_inner(&mut log, &mut tasks, sentence, mode) {
            Ok(events) => Ok(SessionOutput {
                record: EventRecord {
                    sentence_id: sentence.id.clone(),
                    text: sentence.text.clone(),
                    events,
                },
                transcript: log.transcript,
                risks: log.risks,
                tasks,
            }),
            Err(error) => Err(SessionError {
                sentence_id: sentence.id.clone(),
                error,
                transcript: log.transcript,
            }),
        }
    }

    fn session_inner(
        &self,
        log: &mut SessionLog,
        tasks: &mut Vec<TaskResult>,
        sentence: &Sentence,
        mode: SessionMode,
    ) -> Result<Vec<GoldEvent>, DebateError> {
        let query = self.query_vector(sentence)?;
        let detected = match &mode {
            SessionMode::ArgumentsOnly(events) => events.clone(),
            SessionMode::Full | SessionMode::DetectionOnly => {
                let ed = self.run_task(log, TaskSpec::Ed, sentence, &query)?;
                let events = Self::detected_events(&ed.outcome);
                tasks.push(ed);
                events
            }
        };

        let mut merged: Vec<GoldEvent> = Vec::new();
        for (event_type, trigger) in detected {
            if merged.iter().any(|e| e.event_type == event_type && e.trigger == trigger) {
                continue;
            }
            if !sentence.contains_span(&trigger) {
                log.warn(
                    TaskKind::Ed,
                    0,
                    Stage::Summary,
                    "engine",
                    format!("dropped event {event_type} with trigger {trigger:?} not in sentence"),
                );
                continue;
            }
            let mut event = GoldEvent {
                event_type: event_type.clone(),
                trigger: trigger.clone(),
                arguments: Vec::new(),
            };
            if mode != SessionMode::DetectionOnly {
                match self.res.ontology.lookup(&event_type) {
                    Ok(def) => {
                        let spec = TaskSpec::Eae { def, trigger: &trigger };
                        let eae = self.run_task(log, spec, sentence, &query)?;
                        if let Some(args) = Self::extracted_arguments(&eae.outcome) {
                            event.arguments = args.to_gold_arguments();
                        }
                        tasks.push(eae);
                    }
                    Err(_) => log.warn(
                        TaskKind::Eae,
                        0,
                        Stage::Summary,
                        "engine",
                        format!("no argument roles for unknown event type {event_type}"),
                    ),
                }
            }
            merged.push(event);
        }

        if self.config.summarizer == SummarizerMode::Llm {
            if let Some(agent) = &self.agents.summarizer {
                return self.summarize_llm(log, agent, sentence, merged);
            }
        }
        Ok(merged)
    }

    fn summarize_llm(
        &self,
        log: &mut SessionLog,
        agent: &AgentBinding,
        sentence: &Sentence,
        merged: Vec<GoldEvent>,
    ) -> Result<Vec<GoldEvent>, DebateError> {
        let task = TaskKind::Eae;
        let mut agreed = format!("| {} |\n|---|---|---|---|", SUMMARY_HEADER.join(" | "));
        for e in &merged {
            if e.arguments.is_empty() {
                agreed.push_str(&format!("\n| {} | {} | None | None |", e.event_type, e.trigger));
            }
            for a in &e.arguments {
                agreed.push_str(&format!("\n| {} | {} | {} | {} |", e.event_type, e.trigger, a.role, a.content));
            }
        }
        let prompt = render_prompt(TemplateId::Summarizer, &[("[AGREED]", &agreed)])?;
        let mut history = Vec::new();
        let reply = self.call(log, task, 0, Stage::Summary, "summarizer", agent, &mut history, prompt)?;
        let rows = match parse_table(&reply, &SUMMARY_HEADER) {
            Ok(rows) => rows,
            Err(e) => {
                log.warn(task, 0, Stage::Summary, "summarizer", format!("using deterministic merge: {e}"));
                return Ok(merged);
            }
        };
        let mut events: Vec<GoldEvent> = Vec::new();
        for cells in rows {
            let (Some(ty), Some(trigger)) = (cells[0].as_deref().and_then(EventTypeId::new), cells[1].clone()) else {
                continue;
            };
            let Ok(def) = self.res.ontology.lookup(&ty) else {
                log.warn(task, 0, Stage::Summary, "summarizer", format!("dropped unknown event type {ty}"));
                continue;
            };
            if !sentence.contains_span(&trigger) {
                log.warn(task, 0, Stage::Summary, "summarizer", format!("dropped trigger {trigger:?} not in sentence"));
                continue;
            }
            let pos = match events.iter().position(|e| e.event_type == ty && e.trigger == trigger) {
                Some(p) => p,
                None => {
                    events.push(GoldEvent {
                        event_type: ty.clone(),
                        trigger: trigger.clone(),
                        arguments: Vec::new(),
                    });
                    events.len() - 1
                }
            };
            if let (Some(role), Some(content)) = (cells[2].clone(), cells[3].clone()) {
                if def.has_role(&role) && sentence.contains_span(&content) {
                    events[pos].arguments.push(crate::corpus::GoldArgument { role, content });
                } else {
                    log.warn(task, 0, Stage::Summary, "summarizer", format!("dropped argument {role}: {content:?}"));
                }
            }
        }
        Ok(events)
    }
}

fn verdict_label(v: &JudgeVerdict) -> String {
    match v {
        JudgeVerdict::Continue => "continue".into(),
        JudgeVerdict::NoEvent => "no event".into(),
        JudgeVerdict::Agreement(AgreedAnswer::Triggers(t)) => format!(
            "agreement {}",
            t.iter().map(TriggerAnswer::render).collect::<Vec<_>>().join(", ")
        ),
        JudgeVerdict::Agreement(AgreedAnswer::Arguments(a)) => format!("agreement\n{}", a.render()),
    }
}

/// Starts a fresh task state with the engine's initial radius and the given
/// threshold, for driving rounds manually.
pub fn initial_state(engine: &DebateEngine<'_>, task: TaskKind, threshold: RiskThreshold) -> DebateState {
    DebateState::new(task, engine.agents.debaters.len(), engine.drag.initial_radius, threshold)
}
