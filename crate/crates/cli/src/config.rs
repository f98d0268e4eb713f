//! Run configuration: backend bindings, retrieval and gating parameters,
//! corpus paths. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use dao_core::adacp::{AdaCpConfig, CalibrationTask, RiskThreshold};
use dao_core::backends::{
    ChatBackend, EmbeddingBackend, HttpChat, HttpConfig, HttpEmbedder, HttpScorer, ReplayBundle,
    ScoringBackend,
};
use dao_core::corpus::{build_index, load_corpus, EmbeddedIndex, ReferenceEntry, Split};
use dao_core::debate::{AgentBinding, Agents, DebateConfig, SessionThresholds, SummarizerMode};
use dao_core::drag::DragConfig;
use dao_core::ontology::{load_ontology, EventOntology};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEndpoint {
    #[serde(flatten)]
    pub http: HttpConfig,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderEndpoint {
    #[serde(flatten)]
    pub http: HttpConfig,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BackendsConfig {
    /// Scripted agents and a keyed scorer from a replay bundle.
    Replay { bundle: PathBuf },
    /// OpenAI-compatible endpoints. `agents` is keyed by agent name; the
    /// `default` entry covers agents without their own binding.
    Http {
        agents: BTreeMap<String, AgentEndpoint>,
        embedder: EmbedderEndpoint,
        scorer: HttpConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsConfig {
    pub ontology: PathBuf,
    /// Reference corpus; train and unsplit entries form the retrieval index,
    /// calib entries are available to `calibrate`.
    pub reference: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            ontology: PathBuf::from("ontology.jsonl"),
            reference: PathBuf::from("reference.jsonl"),
        }
    }
}

fn default_workers() -> usize {
    1
}

fn default_debaters() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backends: BackendsConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub debate: DebateConfig,
    #[serde(default)]
    pub drag: DragConfig,
    #[serde(default)]
    pub adacp: AdaCpConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_debaters")]
    pub debaters: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).context("malformed config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.drag.validate()?;
        self.adacp.validate()?;
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if !(2..=26).contains(&self.debaters) {
            bail!("debaters must be between 2 and 26");
        }
        if self.debate.max_rounds == 0 {
            bail!("debate.max_rounds must be at least 1");
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline; stable under parse/write cycles.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Initial thresholds per task: the override when set, else the
    /// calibrated value.
    pub fn thresholds(&self) -> Result<SessionThresholds> {
        let get = |task: CalibrationTask| {
            self.adacp
                .initial_threshold(task)
                .ok_or_else(|| anyhow!("no initial threshold for {task:?}; run `dao calibrate` or set adacp.initial_threshold_override"))
        };
        if !self.debate.use_adacp {
            return Ok(SessionThresholds {
                ed: RiskThreshold::accept_all(),
                eae: RiskThreshold::accept_all(),
            });
        }
        Ok(SessionThresholds {
            ed: get(CalibrationTask::Ed)?,
            eae: get(CalibrationTask::Eae)?,
        })
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    RunConfig::parse(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn save_config(path: &Path, config: &RunConfig) -> Result<()> {
    std::fs::write(path, config.to_json())
        .with_context(|| format!("cannot write config {}", path.display()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn agent_names(debaters: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..debaters)
        .map(|i| format!("debater_{}", (b'a' + i as u8) as char))
        .collect();
    names.extend(["critic", "judge", "summarizer"].map(String::from));
    names
}

enum AgentSource {
    Replay(ReplayBundle),
    Http(Agents),
}

/// Everything a command needs: loaded data plus constructed backends.
pub struct Workspace {
    pub config: RunConfig,
    pub ontology: EventOntology,
    pub reference: Vec<ReferenceEntry>,
    pub index: EmbeddedIndex,
    pub embedder: Box<dyn EmbeddingBackend>,
    pub scorer: Box<dyn ScoringBackend>,
    agents: AgentSource,
}

impl Workspace {
    pub fn open(config_path: &Path) -> Result<Self> {
        let config = load_config(config_path)?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        Self::from_config(config, base)
    }

    pub fn from_config(config: RunConfig, base: &Path) -> Result<Self> {
        let ontology_path = resolve(base, &config.paths.ontology);
        let ontology = load_ontology(&ontology_path)
            .with_context(|| format!("cannot load ontology {}", ontology_path.display()))?;
        let reference_path = resolve(base, &config.paths.reference);
        let reference = load_corpus(&reference_path)
            .with_context(|| format!("cannot load reference corpus {}", reference_path.display()))?;

        let (embedder, scorer, agents): (Box<dyn EmbeddingBackend>, Box<dyn ScoringBackend>, AgentSource) =
            match &config.backends {
                BackendsConfig::Replay { bundle } => {
                    let path = resolve(base, bundle);
                    let bundle = ReplayBundle::load(&path)
                        .with_context(|| format!("cannot load replay bundle {}", path.display()))?;
                    (
                        Box::new(bundle.embedder()?),
                        Box::new(bundle.scorer.clone()),
                        AgentSource::Replay(bundle),
                    )
                }
                BackendsConfig::Http { agents, embedder, scorer } => (
                    Box::new(HttpEmbedder::new(embedder.http.clone(), embedder.dimension)),
                    Box::new(HttpScorer::new(scorer.clone())),
                    AgentSource::Http(http_agents(agents, config.debaters, config.debate.summarizer)?),
                ),
            };

        let index_entries: Vec<ReferenceEntry> = reference
            .iter()
            .filter(|e| matches!(e.split, None | Some(Split::Train)))
            .cloned()
            .collect();
        let index = build_index(index_entries, embedder.as_ref()).context("cannot build reference index")?;
        Ok(Self {
            config,
            ontology,
            reference,
            index,
            embedder,
            scorer,
            agents,
        })
    }

    /// Agents for one session. Replay agents are fresh per sentence so each
    /// session consumes its own script.
    pub fn agents_for(&self, sentence_id: &str) -> Agents {
        match &self.agents {
            AgentSource::Http(agents) => agents.clone(),
            AgentSource::Replay(bundle) => {
                let bind = |name: &str| {
                    AgentBinding::new(name, Arc::new(bundle.chat_for(sentence_id, name)) as Arc<dyn ChatBackend>)
                };
                let names = agent_names(self.config.debaters);
                Agents {
                    debaters: names[..self.config.debaters].iter().map(|n| bind(n)).collect(),
                    critic: bind("critic"),
                    judge: bind("judge"),
                    summarizer: (self.config.debate.summarizer == SummarizerMode::Llm).then(|| bind("summarizer")),
                }
            }
        }
    }
}

fn http_agents(
    endpoints: &BTreeMap<String, AgentEndpoint>,
    debaters: usize,
    summarizer: SummarizerMode,
) -> Result<Agents> {
    let bind = |name: &str| -> Result<AgentBinding> {
        let endpoint = endpoints
            .get(name)
            .or_else(|| endpoints.get("default"))
            .ok_or_else(|| anyhow!("no backend binding for agent {name} and no default"))?;
        let chat: Arc<dyn ChatBackend> = Arc::new(HttpChat::new(endpoint.http.clone()));
        Ok(AgentBinding::new(name, chat).with_temperature(endpoint.temperature))
    };
    let names = agent_names(debaters);
    Ok(Agents {
        debaters: names[..debaters].iter().map(|n| bind(n)).collect::<Result<_>>()?,
        critic: bind("critic")?,
        judge: bind("judge")?,
        summarizer: match summarizer {
            SummarizerMode::Llm => Some(bind("summarizer")?),
            SummarizerMode::Deterministic => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn random_configs_round_trip(
            seed in any::<u64>(),
            workers in 1usize..16,
            rounds in 1u32..6,
            delta in 0.01f64..0.99,
            radius in 0.01f64..2.0,
            calibrated in proptest::option::of(0.0f64..50.0),
        ) {
            let mut c = RunConfig::parse(r#"{"backends": {"mode": "replay", "bundle": "b.json"}}"#).unwrap();
            c.seed = seed;
            c.workers = workers;
            c.debate.max_rounds = rounds;
            c.adacp.delta = delta;
            c.drag.initial_radius = radius;
            c.adacp.calibrated.ed = calibrated;
            let once = c.to_json();
            let back = RunConfig::parse(&once).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_json(), once);
        }
    }

    #[test]
    fn defaults_match_reference_settings() {
        let c = RunConfig::parse(r#"{"backends": {"mode": "replay", "bundle": "b.json"}}"#).unwrap();
        assert_eq!(c.drag.top_k, 128);
        assert_eq!(c.drag.max_examples, 10);
        assert_eq!(c.drag.initial_radius, 1.35);
        assert_eq!(c.drag.radius_decay, 0.9);
        assert_eq!(c.adacp.beta, 0.5);
        assert_eq!(c.adacp.initial_threshold_override.ed, Some(1.0));
        assert_eq!(c.adacp.initial_threshold_override.eae, Some(3.0));
        assert_eq!(c.debate.max_rounds, 3);
        assert_eq!(c.workers, 1);
        assert_eq!(c.debaters, 2);
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let c = RunConfig::parse(r#"{"backends": {"mode": "replay", "bundle": "b.json"}, "adacp": {"calibrated": {"ed": "inf", "eae": 2.5}}}"#).unwrap();
        let once = c.to_json();
        let twice = RunConfig::parse(&once).unwrap().to_json();
        assert_eq!(once, twice);
        assert!(once.contains("\"inf\""));
    }

    #[test]
    fn http_bindings_fall_back_to_default() {
        let c = RunConfig::parse(
            r#"{"backends": {"mode": "http",
                "agents": {"default": {"url": "http://localhost:1/v1/chat", "model": "m"},
                           "judge": {"url": "http://localhost:1/v1/chat", "model": "j", "temperature": 0.2}},
                "embedder": {"url": "http://localhost:1/e", "model": "e", "dimension": 16},
                "scorer": {"url": "http://localhost:1/s", "model": "s"}}}"#,
        )
        .unwrap();
        let BackendsConfig::Http { agents, .. } = &c.backends else { panic!() };
        let bound = http_agents(agents, 2, SummarizerMode::Deterministic).unwrap();
        assert_eq!(bound.judge.temperature, 0.2);
        assert_eq!(bound.debaters.len(), 2);
        assert!(http_agents(&BTreeMap::new(), 2, SummarizerMode::Deterministic).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::parse(r#"{"backends": {"mode": "replay", "bundle": "b"}, "typo": 1}"#).is_err());
    }
}
