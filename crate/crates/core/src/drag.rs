//! Diversity-constrained retrieval of reference examples.
//!
//! Retrieval takes the top-K entries nearest to the query sentence, groups
//! them with greedy leader clustering at radius `μ_t`, and keeps at most one
//! entry per cluster, walking clusters from nearest to farthest while
//! balancing positive and negative examples. The radius shrinks by `λ` every
//! debate round, so later rounds retrieve from finer clusters.
//!
//! Leaders play the role of cluster centres: every pair of leaders is more
//! than `μ_t` apart and every member lies within `μ_t` of its leader.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{dot, EmbeddedIndex, Polarity, ReferenceEntry, Sentence};
use crate::ontology::{EventDefinition, EventOntology, EventTypeId};

#[derive(Debug, Error, PartialEq)]
pub enum DragError {
    #[error("query dimension {actual} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid retrieval configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// `1 - u·v`, in `[0, 2]` for unit vectors.
    #[default]
    Cosine,
    /// Euclidean distance between unit vectors, `sqrt(2 - 2 u·v)`, in `[0, 2]`.
    Chord,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let sim = dot(a, b).clamp(-1.0, 1.0);
        match self {
            Self::Cosine => 1.0 - sim,
            Self::Chord => (2.0 - 2.0 * sim).max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityQuota {
    pub positive: usize,
    pub negative: usize,
}

impl PolarityQuota {
    /// `⌈m/2⌉` positive and `⌊m/2⌋` negative.
    pub fn balanced(m: usize) -> Self {
        Self {
            positive: m.div_ceil(2),
            negative: m / 2,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    /// Top-K, leader clustering and polarity-balanced selection.
    #[default]
    Diverse,
    /// The M nearest entries, without clustering or polarity balancing.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragConfig {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_max_examples")]
    pub max_examples: usize,
    #[serde(default = "default_initial_radius")]
    pub initial_radius: f64,
    #[serde(default = "default_radius_decay")]
    pub radius_decay: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default)]
    pub mode: RetrievalMode,
    /// Overrides the balanced quota; must sum to `max_examples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity_quota: Option<PolarityQuota>,
    /// Reuse the first round's top-K candidates instead of re-querying.
    #[serde(default)]
    pub freeze_topk: bool,
}

fn default_top_k() -> usize {
    128
}

fn default_max_examples() -> usize {
    10
}

fn default_initial_radius() -> f64 {
    1.35
}

fn default_radius_decay() -> f64 {
    0.9
}

impl Default for DragConfig {
    fn default() -> Self {
        Self {
            top_k: default_top_k(),
            max_examples: default_max_examples(),
            initial_radius: default_initial_radius(),
            radius_decay: default_radius_decay(),
            metric: DistanceMetric::default(),
            mode: RetrievalMode::default(),
            polarity_quota: None,
            freeze_topk: false,
        }
    }
}

impl DragConfig {
    pub fn validate(&self) -> Result<(), DragError> {
        let bad = |msg: String| Err(DragError::InvalidConfig(msg));
        if self.top_k == 0 || self.max_examples == 0 {
            return bad("top_k and max_examples must be positive".into());
        }
        if self.max_examples > self.top_k {
            return bad(format!(
                "max_examples {} exceeds top_k {}",
                self.max_examples, self.top_k
            ));
        }
        if !(self.initial_radius > 0.0 && self.initial_radius.is_finite()) {
            return bad(format!("initial radius {} must be positive", self.initial_radius));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay <= 1.0) {
            return bad(format!("radius decay {} must be in (0, 1]", self.radius_decay));
        }
        if let Some(q) = self.polarity_quota {
            if q.total() != self.max_examples {
                return bad(format!(
                    "polarity quota {}+{} does not sum to {}",
                    q.positive, q.negative, self.max_examples
                ));
            }
        }
        Ok(())
    }

    pub fn quota(&self) -> PolarityQuota {
        self.polarity_quota
            .unwrap_or_else(|| PolarityQuota::balanced(self.max_examples))
    }
}

/// An index entry with its distance to the query.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub position: usize,
    pub entry: &'a ReferenceEntry,
    pub vector: &'a [f64],
    pub distance: f64,
}

fn by_distance_then_id(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.entry.id().cmp(b.entry.id()))
}

#[derive(Debug, Clone)]
pub struct Cluster<'a> {
    pub leader: Candidate<'a>,
    /// All members in scan order; the leader is first.
    pub members: Vec<Candidate<'a>>,
}

fn check_dimension(index: &EmbeddedIndex, query: &[f64]) -> Result<(), DragError> {
    if query.len() != index.dimension() {
        return Err(DragError::DimensionMismatch {
            expected: index.dimension(),
            actual: query.len(),
        });
    }
    Ok(())
}

/// Every entry passing `keep`, sorted by distance ascending with ties broken
/// by entry id.
pub fn rank_candidates<'a>(
    index: &'a EmbeddedIndex,
    query: &[f64],
    metric: DistanceMetric,
    keep: impl Fn(&ReferenceEntry) -> bool,
) -> Result<Vec<Candidate<'a>>, DragError> {
    check_dimension(index, query)?;
    let mut ranked: Vec<Candidate<'a>> = index
        .iter()
        .enumerate()
        .filter(|(_, (entry, _))| keep(entry))
        .map(|(position, (entry, vector))| Candidate {
            position,
            entry,
            vector,
            distance: metric.distance(query, vector),
        })
        .collect();
    ranked.sort_by(by_distance_then_id);
    Ok(ranked)
}

/// The `k` entries nearest to `query` under cosine distance.
pub fn retrieve_topk<'a>(
    index: &'a EmbeddedIndex,
    query: &[f64],
    k: usize,
) -> Result<Vec<Candidate<'a>>, DragError> {
    let mut ranked = rank_candidates(index, query, DistanceMetric::Cosine, |_| true)?;
    ranked.truncate(k);
    Ok(ranked)
}

/// Greedy leader clustering over vectors in the given order. A vector joins
/// the first cluster whose leader is within `radius`, otherwise it founds a
/// new cluster. Returns member positions per cluster, leader first.
pub fn leader_clusters(vectors: &[&[f64]], radius: f64, metric: DistanceMetric) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        match clusters
            .iter_mut()
            .find(|c| metric.distance(vectors[c[0]], v) <= radius)
        {
            Some(cluster) => cluster.push(i),
            None => clusters.push(vec![i]),
        }
    }
    clusters
}

/// Clusters candidates already sorted by distance to the query.
pub fn cluster_candidates<'a>(
    candidates: &[Candidate<'a>],
    radius: f64,
    metric: DistanceMetric,
) -> Vec<Cluster<'a>> {
    let vectors: Vec<&[f64]> = candidates.iter().map(|c| c.vector).collect();
    leader_clusters(&vectors, radius, metric)
        .into_iter()
        .map(|positions| {
            let members: Vec<Candidate<'a>> = positions.iter().map(|&i| candidates[i]).collect();
            Cluster {
                leader: members[0],
                members,
            }
        })
        .collect()
}

/// Picks at most one entry per cluster, nearest clusters first, filling the
/// polarity quota; slots a polarity cannot fill are backfilled with the
/// other polarity from clusters not yet used. Result is sorted by distance.
pub fn select_diverse<'a>(
    clusters: &[Cluster<'a>],
    m: usize,
    quota: PolarityQuota,
) -> Vec<Candidate<'a>> {
    let mut order: Vec<&Cluster<'a>> = clusters.iter().collect();
    order.sort_by(|a, b| by_distance_then_id(&a.leader, &b.leader));

    let mut open_pos = quota.positive;
    let mut open_neg = quota.negative;
    let mut used = vec![false; order.len()];
    let mut picked: Vec<Candidate<'a>> = Vec::new();

    for (ci, cluster) in order.iter().enumerate() {
        if picked.len() >= m {
            break;
        }
        let choice = cluster
            .members
            .iter()
            .filter(|c| match c.entry.polarity() {
                Polarity::Positive => open_pos > 0,
                Polarity::Negative => open_neg > 0,
            })
            .min_by(|a, b| by_distance_then_id(a, b));
        if let Some(c) = choice {
            match c.entry.polarity() {
                Polarity::Positive => open_pos -= 1,
                Polarity::Negative => open_neg -= 1,
            }
            used[ci] = true;
            picked.push(*c);
        }
    }

    for (ci, cluster) in order.iter().enumerate() {
        if picked.len() >= m {
            break;
        }
        if used[ci] {
            continue;
        }
        if let Some(c) = cluster.members.iter().min_by(|a, b| by_distance_then_id(a, b)) {
            used[ci] = true;
            picked.push(*c);
        }
    }

    picked.sort_by(by_distance_then_id);
    picked
}

pub fn decay_radius(radius: f64, lambda: f64) -> f64 {
    lambda * radius
}

/// Query-side parameters for one retrieval call.
#[derive(Debug, Clone, Copy)]
pub struct RetrievalRequest<'q> {
    pub query: &'q [f64],
    pub radius: f64,
    /// The sentence under inference; index entries with the same id or text
    /// are never retrieved.
    pub exclude: Option<&'q Sentence>,
    /// Restrict candidates to entries annotated with this event type.
    pub required_type: Option<&'q EventTypeId>,
    /// Index positions of a previously frozen top-K list.
    pub frozen_topk: Option<&'q [usize]>,
}

/// Information packet broadcast to debaters and the critic.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub examples: Vec<ReferenceEntry>,
    pub distances: Vec<f64>,
    pub definitions: Vec<EventDefinition>,
    pub unknown_types: Vec<EventTypeId>,
    pub radius_used: f64,
    pub topk_positions: Vec<usize>,
    pub cluster_count: usize,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty() && self.definitions.is_empty()
    }
}

/// Definitions for every distinct event type mentioned, plus reference
/// examples selected for the query.
pub fn gather_event_info<'t>(
    event_types: impl IntoIterator<Item = &'t EventTypeId>,
    ontology: &EventOntology,
    index: &EmbeddedIndex,
    request: &RetrievalRequest<'_>,
    config: &DragConfig,
) -> Result<RetrievalResult, DragError> {
    let mut seen = HashSet::new();
    let mut definitions = Vec::new();
    let mut unknown_types = Vec::new();
    for ty in event_types {
        if !seen.insert(ty.clone()) {
            continue;
        }
        match ontology.lookup(ty) {
            Ok(def) => definitions.push(def.clone()),
            Err(_) => unknown_types.push(ty.clone()),
        }
    }

    check_dimension(index, request.query)?;
    let keep = |entry: &ReferenceEntry| {
        if let Some(s) = request.exclude {
            if entry.id() == s.id || entry.sentence.text == s.text {
                return false;
            }
        }
        true
    };

    let mut topk: Vec<Candidate<'_>> = match request.frozen_topk {
        Some(positions) => {
            let mut frozen: Vec<Candidate<'_>> = positions
                .iter()
                .filter_map(|&p| {
                    let entry = index.entries().get(p)?;
                    let vector = index.vectors()[p].as_slice();
                    Some(Candidate {
                        position: p,
                        entry,
                        vector,
                        distance: config.metric.distance(request.query, vector),
                    })
                })
                .filter(|c| keep(c.entry))
                .collect();
            frozen.sort_by(by_distance_then_id);
            frozen
        }
        None => {
            let mut ranked = rank_candidates(index, request.query, config.metric, keep)?;
            ranked.truncate(config.top_k);
            ranked
        }
    };
    let topk_positions = topk.iter().map(|c| c.position).collect();
    if let Some(ty) = request.required_type {
        topk.retain(|c| c.entry.has_event_type(ty));
    }

    let (selected, cluster_count) = match config.mode {
        RetrievalMode::Diverse => {
            let clusters = cluster_candidates(&topk, request.radius, config.metric);
            let n = clusters.len();
            (select_diverse(&clusters, config.max_examples, config.quota()), n)
        }
        RetrievalMode::Nearest => {
            let n = topk.len();
            topk.truncate(config.max_examples);
            (topk, n)
        }
    };

    Ok(RetrievalResult {
        distances: selected.iter().map(|c| c.distance).collect(),
        examples: selected.iter().map(|c| c.entry.clone()).collect(),
        definitions,
        unknown_types,
        radius_used: request.radius,
        topk_positions,
        cluster_count,
    })
}
