#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use dao_core::adacp::RiskThreshold;
use dao_core::backends::{ChatBackend, ReplayBundle, ScriptedChat};
use dao_core::corpus::{build_index, load_corpus, EmbeddedIndex, ReferenceEntry, Split};
use dao_core::debate::{AgentBinding, Agents, SessionThresholds};
use dao_core::ontology::{load_ontology, EventOntology};

pub const AGENTS: [&str; 4] = ["debater_a", "debater_b", "critic", "judge"];

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn ontology() -> EventOntology {
    load_ontology(fixture("ontology/ace33.jsonl")).unwrap()
}

pub struct Table3 {
    pub ontology: EventOntology,
    pub bundle: ReplayBundle,
    pub index: EmbeddedIndex,
    pub inputs: Vec<ReferenceEntry>,
}

pub fn table3() -> Table3 {
    let bundle = ReplayBundle::load(fixture("table3/replay.json")).unwrap();
    let embedder = bundle.embedder().unwrap();
    let refs: Vec<ReferenceEntry> = load_corpus(fixture("table3/reference.jsonl"))
        .unwrap()
        .into_iter()
        .filter(|e| e.split == Some(Split::Train))
        .collect();
    let index = build_index(refs, &embedder).unwrap();
    let inputs = load_corpus(fixture("table3/input.jsonl")).unwrap();
    Table3 {
        ontology: ontology(),
        bundle,
        index,
        inputs,
    }
}

/// Scripted agents for one session, plus handles to inspect their calls.
pub fn scripted_agents(bundle: &ReplayBundle, sentence_id: &str) -> (Agents, Vec<Arc<ScriptedChat>>) {
    let chats: Vec<Arc<ScriptedChat>> = AGENTS
        .iter()
        .map(|a| Arc::new(bundle.chat_for(sentence_id, a)))
        .collect();
    let bind = |i: usize| AgentBinding::new(AGENTS[i], chats[i].clone() as Arc<dyn ChatBackend>);
    let agents = Agents {
        debaters: vec![bind(0), bind(1)],
        critic: bind(2),
        judge: bind(3),
        summarizer: None,
    };
    (agents, chats)
}

pub fn default_thresholds() -> SessionThresholds {
    SessionThresholds {
        ed: RiskThreshold::new(1.0),
        eae: RiskThreshold::new(3.0),
    }
}
